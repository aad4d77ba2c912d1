"""Independent high-precision evaluation of the projection and distance
formulas. Used once to produce the frozen constants in tests/test_geo.cpp."""
from mpmath import mp, mpf, sin, cos, atan2, pi, asin, sqrt, radians, degrees

mp.dps = 40
R = mpf(6372800)


def enu(clat, clng, h, tlat, tlng):
    clat, clng, tlat, tlng = map(lambda v: radians(mpf(v)), (clat, clng, tlat, tlng))
    return R * cos(clat) * sin(tlng - clng), R * sin(tlat - clat), -mpf(h)


def pixel(clat, clng, yaw, h, tlat, tlng, W=2048, H=1024):
    ex, ey, _ = enu(clat, clng, h, tlat, tlng)
    z = sqrt(ex * ex + ey * ey)
    x = (pi + atan2(ex, ey) - radians(mpf(yaw))) * W / (2 * pi)
    x = x % W
    y = (pi / 2 - atan2(-mpf(h), z)) * H / pi
    return x, y, z


def hav(alat, alng, blat, blng):
    alat, alng, blat, blng = map(lambda v: radians(mpf(v)), (alat, alng, blat, blng))
    a = sin((blat - alat) / 2) ** 2 + cos(alat) * cos(blat) * sin((blng - alng) / 2) ** 2
    return 2 * R * asin(sqrt(a))


if __name__ == "__main__":
    print("enu north", enu(0, 0, 2.5, 0.0001, 0))
    print("enu east", enu(45, 10, 2.5, 45, 10.0002))
    print("pixel yaw0", pixel(0, 0, 0, 2.5, 0.0001, 0))
    print("pixel yaw180", pixel(0, 0, 180, 2.5, 0.0001, 0))
    print("elev", atan2(-2.5, enu(0, 0, 2.5, 0.0001, 0)[1]))
    print("hav 1e-4", hav(0, 0, 0.0001, 0))
    print("hav antipodal", hav(0, 0, 0, 180), pi * R)
    print("a at W-1", mpf(360) * 2047 / 2048)
    # 15 m north-south camera separation at lat 34
    dlat = degrees(asin(mpf(15) / R))
    print("dlat for 15 m", dlat, hav(34, -118, 34 + dlat, -118))
    print("yaw 1deg at 20m", 20 * mp.tan(radians(1)), 2 * 20 * sin(radians(mpf(1)) / 2))
    print("sqrt 12.5", sqrt(mpf(12.5)))
