#pragma once

// Backend of the multi-view annotation workflow. Box documents (one per
// image) and identity documents live in memory as immutable snapshots and
// are persisted to an append-only JSON-lines log. Readers grab the current
// snapshot without taking a lock; writers serialize on a mutex, check the
// caller's expected revision, append to the log and publish a new snapshot.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mvgeo/types.hpp"

namespace mvgeo {

/// Failure with an HTTP status and a machine-readable code.
class ServiceError : public std::runtime_error {
public:
    ServiceError(int status, std::string code, std::string message, nlohmann::json detail = nlohmann::json::object());
    int status() const noexcept { return status_; }
    const std::string& code() const noexcept { return code_; }
    const nlohmann::json& detail() const noexcept { return detail_; }
    /// {code, message, detail}
    nlohmann::json to_json() const;

private:
    int status_;
    std::string code_;
    nlohmann::json detail_;
};

struct AnnotatedBox {
    std::string box_id;
    BoundingBox box;
    int label = 0;
    std::string author;
    std::uint64_t revision = 0;  ///< document revision of the last change
};

struct AnnotationDocument {
    std::string image_id;
    std::vector<AnnotatedBox> boxes;
    std::uint64_t revision = 0;
};

enum class IdentityStatus { Open, Complete };

struct IdentityLink {
    std::string image_id;
    std::string box_id;
    friend bool operator==(const IdentityLink&, const IdentityLink&) = default;
};

struct IdentityDocument {
    InstanceId instance_id;
    GeoCoordinate geo;
    std::vector<IdentityLink> links;  ///< sorted by image id, at most one per image
    IdentityStatus status = IdentityStatus::Open;
    std::uint64_t revision = 0;
};

nlohmann::json to_json(const AnnotationDocument& doc);
AnnotationDocument annotation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const IdentityDocument& doc);
IdentityDocument identity_doc_from_json(const nlohmann::json& j);

struct SessionPanorama {
    std::string image_id;
    double distance_m = 0.0;
    std::optional<PixelPoint> marker;  ///< absent when the target sits at the camera
    std::vector<Detection> proposals;
};

struct SessionView {
    GeoCoordinate target;
    std::vector<SessionPanorama> panoramas;
    bool short_view = false;  ///< fewer panoramas than requested were available
};

nlohmann::json to_json(const SessionView& view);

/// Box payload of an upsert.
struct BoxUpsert {
    std::optional<std::string> box_id;  ///< absent: create with a fresh id
    BoundingBox box;
    int label = 0;
    std::string author;
    std::optional<std::uint64_t> expected_revision;
    /// Update only: fail with 404 instead of creating the box.
    bool must_exist = false;
};

struct IdentityUpsert {
    InstanceId instance_id;
    std::optional<GeoCoordinate> geo;
    std::vector<IdentityLink> links;
    std::optional<IdentityStatus> status;
    std::optional<std::uint64_t> expected_revision;
};

enum class ExportFormat { Json, Voc };

ExportFormat export_format_from_string(const std::string& name);

struct ServiceConfig {
    std::filesystem::path log_path;    ///< empty: in-memory only
    std::filesystem::path image_dir;   ///< holds <image_id>.jpg
    std::size_t session_panoramas = 4;
    double proposal_radius_px = 150.0; ///< at 2048 px width, scaled with the image
};

class AnnotationService {
public:
    /// Replays the log if it has entries; otherwise seeds the documents from
    /// the dataset's boxes and identities and logs the seed.
    AnnotationService(SceneDataset scene, DetectionMap proposals, ServiceConfig cfg);
    ~AnnotationService();
    AnnotationService(const AnnotationService&) = delete;
    AnnotationService& operator=(const AnnotationService&) = delete;

    nlohmann::json scenes() const;
    nlohmann::json image_meta(const std::string& image_id) const;
    /// Raw image bytes. Throws ServiceError 404 when the file is missing.
    std::string image_bytes(const std::string& image_id) const;

    SessionView select_target(const GeoCoordinate& target) const;
    /// Validating wrapper for untrusted input.
    SessionView select_target(double lat_deg, double lng_deg) const;

    AnnotationDocument document(const std::string& image_id) const;
    AnnotationDocument upsert_box(const std::string& image_id, const BoxUpsert& upsert);

    IdentityDocument identity(const InstanceId& id) const;
    IdentityDocument link_identity(const IdentityUpsert& upsert);

    /// The store in the dataset model: scene metadata, annotated boxes,
    /// identity links turned into instance ids.
    SceneDataset to_dataset() const;
    /// Archive members, path -> content.
    std::map<std::string, std::string> export_files(ExportFormat format) const;

    std::size_t box_count() const;
    /// Deterministic dump of every document; equal stores give equal bytes.
    std::string snapshot_json() const;

private:
    struct State;
    std::shared_ptr<const State> load() const;
    void publish(std::shared_ptr<const State> next);
    void append_log(const std::vector<nlohmann::json>& entries);
    void apply_entry(State& state, const nlohmann::json& entry) const;
    void replay();
    void seed();

    SceneDataset scene_;
    DetectionMap proposals_;
    ServiceConfig cfg_;
    std::shared_ptr<const State> state_;
    std::mutex write_mutex_;
    int log_fd_ = -1;
};

/// POSIX ustar archive of the given members, deterministic (zero mtime,
/// fixed modes, members in map order).
std::string make_tar(const std::map<std::string, std::string>& members);

/// Reads back an archive written by make_tar.
std::map<std::string, std::string> read_tar(const std::string& archive);

/// Pascal VOC XML for one image; instance and box ids as object attributes.
std::string voc_xml(const ImageRecord& record);

struct ServerConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  ///< 0 picks a free port
    std::string cors_origin = "*";
};

/// HTTP front end over an AnnotationService.
class AnnotationServer {
public:
    AnnotationServer(AnnotationService& service, ServerConfig cfg);
    ~AnnotationServer();
    AnnotationServer(const AnnotationServer&) = delete;
    AnnotationServer& operator=(const AnnotationServer&) = delete;

    /// Binds and serves on a background thread; returns the bound port.
    int start();
    /// Binds and serves on the calling thread until stop().
    void run(const std::function<void(int port)>& on_bound = {});
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace mvgeo
