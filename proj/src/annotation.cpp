#include "mvgeo/annotation.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <set>
#include <sstream>

#include "mvgeo/dataset.hpp"
#include "mvgeo/error.hpp"
#include "mvgeo/json_io.hpp"

namespace mvgeo {

ServiceError::ServiceError(int status, std::string code, std::string message, json detail)
    : std::runtime_error(message), status_(status), code_(std::move(code)), detail_(std::move(detail))
{
}

json ServiceError::to_json() const
{
    return json{{"code", code_}, {"message", what()}, {"detail", detail_}};
}

namespace {

std::string_view status_name(IdentityStatus s)
{
    return s == IdentityStatus::Complete ? "complete" : "open";
}

IdentityStatus status_from(const std::string& s)
{
    if (s == "open") return IdentityStatus::Open;
    if (s == "complete") return IdentityStatus::Complete;
    throw ServiceError(422, "InvalidStatus", "status must be 'open' or 'complete'", {{"status", s}});
}

}  // namespace

json to_json(const AnnotationDocument& doc)
{
    json boxes = json::array();
    for (const auto& b : doc.boxes) {
        boxes.push_back({{"box_id", b.box_id},
                         {"box", box_to_array(b.box)},
                         {"label", b.label},
                         {"author", b.author},
                         {"revision", b.revision}});
    }
    return json{{"image_id", doc.image_id}, {"revision", doc.revision}, {"boxes", std::move(boxes)}};
}

AnnotationDocument annotation_from_json(const json& j)
{
    AnnotationDocument doc;
    doc.image_id = j.at("image_id").get<std::string>();
    doc.revision = j.at("revision").get<std::uint64_t>();
    for (const auto& b : j.at("boxes")) {
        doc.boxes.push_back({b.at("box_id").get<std::string>(), box_from_array(b.at("box")), b.value("label", 0),
                             b.value("author", std::string{}), b.at("revision").get<std::uint64_t>()});
    }
    return doc;
}

json to_json(const IdentityDocument& doc)
{
    json links = json::array();
    for (const auto& l : doc.links) links.push_back({{"image_id", l.image_id}, {"box_id", l.box_id}});
    return json{{"instance_id", doc.instance_id},
                {"geo", doc.geo},
                {"links", std::move(links)},
                {"status", status_name(doc.status)},
                {"revision", doc.revision}};
}

IdentityDocument identity_doc_from_json(const json& j)
{
    IdentityDocument doc;
    doc.instance_id = j.at("instance_id").get<std::string>();
    doc.geo = j.at("geo").get<GeoCoordinate>();
    for (const auto& l : j.at("links")) {
        doc.links.push_back({l.at("image_id").get<std::string>(), l.at("box_id").get<std::string>()});
    }
    doc.status = status_from(j.value("status", std::string("open")));
    doc.revision = j.at("revision").get<std::uint64_t>();
    return doc;
}

json to_json(const SessionView& view)
{
    json panos = json::array();
    for (const auto& p : view.panoramas) {
        json props = json::array();
        for (const auto& d : p.proposals) props.push_back(d);
        panos.push_back({{"image_id", p.image_id},
                         {"distance_m", p.distance_m},
                         {"marker", p.marker ? json{{"x", p.marker->x}, {"y", p.marker->y}} : json(nullptr)},
                         {"proposals", std::move(props)}});
    }
    return json{{"target", view.target}, {"short", view.short_view}, {"panoramas", std::move(panos)}};
}

ExportFormat export_format_from_string(const std::string& name)
{
    if (name == "json") return ExportFormat::Json;
    if (name == "voc") return ExportFormat::Voc;
    throw ServiceError(422, "UnknownFormat", "export format must be 'json' or 'voc'", {{"format", name}});
}

struct AnnotationService::State {
    std::map<std::string, std::shared_ptr<const AnnotationDocument>> images;
    std::map<InstanceId, std::shared_ptr<const IdentityDocument>> identities;
    /// (image id, box id) -> identity holding the link
    std::map<std::pair<std::string, std::string>, InstanceId> owner;
};

AnnotationService::AnnotationService(SceneDataset scene, DetectionMap proposals, ServiceConfig cfg)
    : scene_(std::move(scene)), proposals_(std::move(proposals)), cfg_(std::move(cfg)),
      state_(std::make_shared<const State>())
{
    bool replayed = false;
    if (!cfg_.log_path.empty()) {
        if (cfg_.log_path.has_parent_path()) std::filesystem::create_directories(cfg_.log_path.parent_path());
        if (std::filesystem::exists(cfg_.log_path) && std::filesystem::file_size(cfg_.log_path) > 0) {
            replay();
            replayed = true;
        }
        log_fd_ = ::open(cfg_.log_path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
        if (log_fd_ < 0) {
            throw Error(ErrorCode::IoError, "cannot open log " + cfg_.log_path.string() + ": " + std::strerror(errno));
        }
    }
    if (!replayed) seed();
}

AnnotationService::~AnnotationService()
{
    if (log_fd_ >= 0) ::close(log_fd_);
}

std::shared_ptr<const AnnotationService::State> AnnotationService::load() const
{
    return std::atomic_load(&state_);
}

void AnnotationService::publish(std::shared_ptr<const State> next)
{
    std::atomic_store(&state_, std::move(next));
}

void AnnotationService::append_log(const std::vector<json>& entries)
{
    if (log_fd_ < 0 || entries.empty()) return;
    std::string buf;
    for (const auto& e : entries) buf += e.dump() + "\n";
    const char* p = buf.data();
    std::size_t left = buf.size();
    while (left > 0) {
        const ssize_t n = ::write(log_fd_, p, left);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ServiceError(500, "StorageError", std::string("log append failed: ") + std::strerror(errno));
        }
        p += n;
        left -= static_cast<std::size_t>(n);
    }
    if (::fsync(log_fd_) != 0) throw ServiceError(500, "StorageError", "log fsync failed");
}

void AnnotationService::apply_entry(State& state, const json& entry) const
{
    const std::string collection = entry.at("collection").get<std::string>();
    if (collection == "images") {
        auto doc = std::make_shared<const AnnotationDocument>(annotation_from_json(entry.at("doc")));
        state.images[doc->image_id] = std::move(doc);
    } else if (collection == "identities") {
        auto doc = std::make_shared<const IdentityDocument>(identity_doc_from_json(entry.at("doc")));
        if (const auto it = state.identities.find(doc->instance_id); it != state.identities.end()) {
            for (const auto& l : it->second->links) state.owner.erase({l.image_id, l.box_id});
        }
        for (const auto& l : doc->links) state.owner[{l.image_id, l.box_id}] = doc->instance_id;
        state.identities[doc->instance_id] = std::move(doc);
    } else {
        throw Error(ErrorCode::ParseError, "unknown log collection '" + collection + "'");
    }
}

void AnnotationService::replay()
{
    const std::string text = read_text_file(cfg_.log_path);
    // a final line without its newline is a torn append: drop it
    const std::size_t complete = text.rfind('\n') == std::string::npos ? 0 : text.rfind('\n') + 1;
    if (complete < text.size()) std::filesystem::resize_file(cfg_.log_path, complete);

    auto state = std::make_shared<State>();
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < complete) {
        const std::size_t end = text.find('\n', start);
        ++line_no;
        const std::string line = text.substr(start, end - start);
        start = end + 1;
        if (line.empty()) continue;
        try {
            apply_entry(*state, json::parse(line));
        } catch (const std::exception& e) {
            throw Error(ErrorCode::IntegrityError,
                        cfg_.log_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    publish(std::move(state));
}

void AnnotationService::seed()
{
    auto state = std::make_shared<State>();
    std::vector<json> entries;
    for (const auto& [id, rec] : scene_.images) {
        if (rec.ground_truth.empty()) continue;
        AnnotationDocument doc;
        doc.image_id = id;
        doc.revision = 1;
        for (std::size_t i = 0; i < rec.ground_truth.size(); ++i) {
            const auto& gt = rec.ground_truth[i];
            doc.boxes.push_back({gt.box_id.empty() ? "b" + std::to_string(i) : gt.box_id, gt.box, gt.class_label,
                                 gt.author, 1});
        }
        entries.push_back({{"collection", "images"}, {"doc", to_json(doc)}});
    }
    for (const auto& [id, ident] : scene_.identities) {
        IdentityDocument doc;
        doc.instance_id = id;
        doc.geo = ident.geo;
        doc.revision = 1;
        doc.status = ident.status ? status_from(*ident.status) : IdentityStatus::Open;
        for (const auto& ref : ident.appearances) {
            const auto& gts = scene_.image(ref.image_id).ground_truth;
            if (ref.box_index >= gts.size()) continue;
            const auto& gt = gts[ref.box_index];
            doc.links.push_back({ref.image_id, gt.box_id.empty() ? "b" + std::to_string(ref.box_index) : gt.box_id});
        }
        std::sort(doc.links.begin(), doc.links.end(),
                  [](const IdentityLink& a, const IdentityLink& b) { return a.image_id < b.image_id; });
        entries.push_back({{"collection", "identities"}, {"doc", to_json(doc)}});
    }
    for (const auto& e : entries) apply_entry(*state, e);
    std::lock_guard lock(write_mutex_);
    append_log(entries);
    publish(std::move(state));
}

namespace {

void require_image(const SceneDataset& scene, const std::string& image_id)
{
    if (!scene.images.contains(image_id)) {
        throw ServiceError(404, "ImageNotFound", "no image '" + image_id + "'", {{"image_id", image_id}});
    }
}

json record_meta(const ImageRecord& rec)
{
    ImageRecord bare = rec;
    bare.ground_truth.clear();
    json j = image_record_to_json(bare);
    j.erase("boxes");
    return j;
}

}  // namespace

json AnnotationService::scenes() const
{
    const auto st = load();
    json images = json::array();
    std::size_t boxes = 0;
    for (const auto& [id, rec] : scene_.images) {
        json j = record_meta(rec);
        const auto it = st->images.find(id);
        const std::size_t n = it == st->images.end() ? 0 : it->second->boxes.size();
        boxes += n;
        j["n_boxes"] = n;
        j["revision"] = it == st->images.end() ? 0 : it->second->revision;
        images.push_back(std::move(j));
    }
    return json{{"images", std::move(images)}, {"n_boxes", boxes}, {"n_identities", st->identities.size()}};
}

json AnnotationService::image_meta(const std::string& image_id) const
{
    require_image(scene_, image_id);
    const auto st = load();
    json j = record_meta(scene_.images.at(image_id));
    const auto it = st->images.find(image_id);
    j["document"] = it == st->images.end() ? to_json(AnnotationDocument{image_id, {}, 0}) : to_json(*it->second);
    json props = json::array();
    if (const auto p = proposals_.find(image_id); p != proposals_.end()) {
        for (const auto& d : p->second) props.push_back(d);
    }
    j["proposals"] = std::move(props);
    json links = json::object();
    for (const auto& [key, owner] : st->owner) {
        if (key.first == image_id) links[key.second] = owner;
    }
    j["identities"] = std::move(links);
    return j;
}

std::string AnnotationService::image_bytes(const std::string& image_id) const
{
    require_image(scene_, image_id);
    const auto path = cfg_.image_dir / (image_id + ".jpg");
    if (cfg_.image_dir.empty() || !std::filesystem::exists(path)) {
        throw ServiceError(404, "ImageBytesNotFound", "no image file for '" + image_id + "'", {{"image_id", image_id}});
    }
    return read_text_file(path);
}

SessionView AnnotationService::select_target(double lat_deg, double lng_deg) const
{
    GeoCoordinate g;
    try {
        g = make_geo(lat_deg, lng_deg);
    } catch (const Error& e) {
        throw ServiceError(422, "InvalidCoordinate", e.what(), {{"lat", lat_deg}, {"lng", lng_deg}});
    }
    return select_target(g);
}

SessionView AnnotationService::select_target(const GeoCoordinate& target) const
{
    if (scene_.images.empty()) throw ServiceError(404, "DatasetEmpty", "no panoramas loaded");
    std::vector<std::pair<double, const ImageRecord*>> by_distance;
    for (const auto& [id, rec] : scene_.images) {
        by_distance.emplace_back(haversine_distance(rec.camera.location, target), &rec);
    }
    std::sort(by_distance.begin(), by_distance.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second->image_id < b.second->image_id;
    });
    const std::size_t k = std::min(cfg_.session_panoramas, by_distance.size());

    SessionView view;
    view.target = target;
    view.short_view = k < cfg_.session_panoramas;
    for (std::size_t i = 0; i < k; ++i) {
        const ImageRecord& rec = *by_distance[i].second;
        SessionPanorama p;
        p.image_id = rec.image_id;
        p.distance_m = by_distance[i].first;
        try {
            p.marker = pixel_from_geo(rec.camera, target, rec.pano);
        } catch (const Error&) {
            p.marker.reset();
        }
        if (p.marker) {
            const double W = rec.pano.width_px;
            const double radius = cfg_.proposal_radius_px * W / 2048.0;
            if (const auto it = proposals_.find(rec.image_id); it != proposals_.end()) {
                for (const auto& d : it->second) {
                    const PixelPoint f = d.box.footpoint(W);
                    double dx = std::abs(f.x - p.marker->x);
                    dx = std::min(dx, W - dx);
                    if (std::hypot(dx, f.y - p.marker->y) <= radius) p.proposals.push_back(d);
                }
            }
        }
        view.panoramas.push_back(std::move(p));
    }
    return view;
}

AnnotationDocument AnnotationService::document(const std::string& image_id) const
{
    require_image(scene_, image_id);
    const auto st = load();
    const auto it = st->images.find(image_id);
    if (it == st->images.end()) return AnnotationDocument{image_id, {}, 0};
    return *it->second;
}

AnnotationDocument AnnotationService::upsert_box(const std::string& image_id, const BoxUpsert& up)
{
    require_image(scene_, image_id);
    const ImageRecord& rec = scene_.images.at(image_id);
    if (!up.box.well_ordered() || !box_within_image(up.box, rec.pano)) {
        throw ServiceError(422, "InvalidBox", "box is empty or outside the image",
                           {{"box", box_to_array(up.box)}, {"width", rec.pano.width_px}, {"height", rec.pano.height_px}});
    }
    if (up.box_id && up.box_id->empty()) throw ServiceError(422, "InvalidBox", "box_id must not be empty");

    std::lock_guard lock(write_mutex_);
    const auto st = load();
    const auto it = st->images.find(image_id);
    AnnotationDocument doc = it == st->images.end() ? AnnotationDocument{image_id, {}, 0} : *it->second;

    auto existing = doc.boxes.end();
    if (up.box_id) {
        existing = std::find_if(doc.boxes.begin(), doc.boxes.end(),
                                [&](const AnnotatedBox& b) { return b.box_id == *up.box_id; });
    }
    if (up.must_exist && existing == doc.boxes.end()) {
        throw ServiceError(404, "BoxNotFound", "no box '" + up.box_id.value_or("") + "' in image '" + image_id + "'",
                           {{"image_id", image_id}, {"box_id", up.box_id.value_or("")}});
    }
    if (existing != doc.boxes.end() && !up.expected_revision) {
        throw ServiceError(428, "RevisionRequired", "updating a box requires expected_revision",
                           {{"current_revision", doc.revision}});
    }
    if (up.expected_revision && *up.expected_revision != doc.revision) {
        throw ServiceError(409, "RevisionConflict", "document changed since it was read",
                           {{"image_id", image_id},
                            {"expected_revision", *up.expected_revision},
                            {"current_revision", doc.revision}});
    }

    doc.revision += 1;
    if (existing != doc.boxes.end()) {
        existing->box = up.box;
        existing->label = up.label;
        existing->author = up.author;
        existing->revision = doc.revision;
    } else {
        std::string id;
        if (up.box_id) {
            id = *up.box_id;
        } else {
            std::set<std::string> taken;
            for (const auto& b : doc.boxes) taken.insert(b.box_id);
            for (std::size_t n = doc.boxes.size();; ++n) {
                id = "b" + std::to_string(n);
                if (!taken.contains(id)) break;
            }
        }
        doc.boxes.push_back({id, up.box, up.label, up.author, doc.revision});
    }

    const json entry{{"collection", "images"}, {"doc", to_json(doc)}};
    auto next = std::make_shared<State>(*st);
    apply_entry(*next, entry);
    append_log({entry});
    publish(std::move(next));
    return doc;
}

IdentityDocument AnnotationService::identity(const InstanceId& id) const
{
    const auto st = load();
    const auto it = st->identities.find(id);
    if (it == st->identities.end()) {
        throw ServiceError(404, "IdentityNotFound", "no identity '" + id + "'", {{"instance_id", id}});
    }
    return *it->second;
}

IdentityDocument AnnotationService::link_identity(const IdentityUpsert& up)
{
    if (up.instance_id.empty()) throw ServiceError(422, "InvalidIdentity", "instance_id must not be empty");
    std::set<std::string> seen;
    for (const auto& l : up.links) {
        if (!seen.insert(l.image_id).second) {
            throw ServiceError(422, "DuplicateImageLink", "payload links two boxes in image '" + l.image_id + "'",
                               {{"image_id", l.image_id}});
        }
    }

    std::lock_guard lock(write_mutex_);
    const auto st = load();
    for (const auto& l : up.links) {
        const auto it = st->images.find(l.image_id);
        const bool found = it != st->images.end() &&
                           std::any_of(it->second->boxes.begin(), it->second->boxes.end(),
                                       [&](const AnnotatedBox& b) { return b.box_id == l.box_id; });
        if (!found) {
            throw ServiceError(404, "DanglingReference", "no box '" + l.box_id + "' in image '" + l.image_id + "'",
                               {{"image_id", l.image_id}, {"box_id", l.box_id}});
        }
        const auto owner = st->owner.find({l.image_id, l.box_id});
        if (owner != st->owner.end() && owner->second != up.instance_id) {
            throw ServiceError(422, "BoxAlreadyLinked", "box belongs to identity '" + owner->second + "'",
                               {{"image_id", l.image_id}, {"box_id", l.box_id}, {"instance_id", owner->second}});
        }
    }

    const auto it = st->identities.find(up.instance_id);
    IdentityDocument doc;
    if (it != st->identities.end()) {
        doc = *it->second;
        if (up.expected_revision && *up.expected_revision != doc.revision) {
            throw ServiceError(409, "RevisionConflict", "identity changed since it was read",
                               {{"instance_id", up.instance_id},
                                {"expected_revision", *up.expected_revision},
                                {"current_revision", doc.revision}});
        }
    } else {
        if (up.expected_revision && *up.expected_revision != 0) {
            throw ServiceError(409, "RevisionConflict", "identity does not exist yet",
                               {{"instance_id", up.instance_id}, {"expected_revision", *up.expected_revision},
                                {"current_revision", 0}});
        }
        if (!up.geo) throw ServiceError(422, "MissingGeo", "a new identity needs a geo position");
        if (up.links.empty()) throw ServiceError(422, "NoLinks", "a new identity needs at least one link");
        doc.instance_id = up.instance_id;
    }
    if (up.geo) doc.geo = *up.geo;
    if (up.status) doc.status = *up.status;
    for (const auto& l : up.links) {
        const auto same = std::find_if(doc.links.begin(), doc.links.end(),
                                       [&](const IdentityLink& x) { return x.image_id == l.image_id; });
        if (same != doc.links.end()) {
            same->box_id = l.box_id;
        } else {
            doc.links.push_back(l);
        }
    }
    std::sort(doc.links.begin(), doc.links.end(),
              [](const IdentityLink& a, const IdentityLink& b) { return a.image_id < b.image_id; });
    doc.revision += 1;

    const json entry{{"collection", "identities"}, {"doc", to_json(doc)}};
    auto next = std::make_shared<State>(*st);
    apply_entry(*next, entry);
    append_log({entry});
    publish(std::move(next));
    return doc;
}

SceneDataset AnnotationService::to_dataset() const
{
    const auto st = load();
    SceneDataset out;
    out.splits = scene_.splits;
    std::map<std::pair<std::string, std::string>, std::size_t> index_of;
    for (const auto& [id, rec] : scene_.images) {
        ImageRecord r = rec;
        r.ground_truth.clear();
        if (const auto it = st->images.find(id); it != st->images.end()) {
            for (const auto& b : it->second->boxes) {
                GroundTruthBox gt;
                gt.box = b.box;
                gt.class_label = b.label;
                gt.box_id = b.box_id;
                gt.author = b.author;
                if (const auto o = st->owner.find({id, b.box_id}); o != st->owner.end()) {
                    const IdentityDocument& ident = *st->identities.at(o->second);
                    gt.instance_id = ident.instance_id;
                    gt.geo = ident.geo;
                    gt.distance_v = ground_distance(enu_from_geo(r.camera, ident.geo));
                    gt.heading_a = heading_from_column(b.box.footpoint(r.pano.width_px).x, r.pano);
                }
                index_of[{id, b.box_id}] = r.ground_truth.size();
                r.ground_truth.push_back(std::move(gt));
            }
        }
        out.images[id] = std::move(r);
    }
    for (const auto& [id, doc] : st->identities) {
        Identity ident;
        ident.instance_id = id;
        ident.geo = doc->geo;
        ident.status = std::string(status_name(doc->status));
        if (const auto src = scene_.identities.find(id); src != scene_.identities.end()) {
            ident.altitude_m = src->second.altitude_m;
        }
        for (const auto& l : doc->links) ident.appearances.push_back({l.image_id, index_of.at({l.image_id, l.box_id})});
        out.identities[id] = std::move(ident);
    }
    return out;
}

std::map<std::string, std::string> AnnotationService::export_files(ExportFormat format) const
{
    const SceneDataset ds = to_dataset();
    if (format == ExportFormat::Json) return pasadena_files(ds);
    std::map<std::string, std::string> files;
    for (const auto& [id, rec] : ds.images) {
        if (!rec.ground_truth.empty()) files["annotations/" + id + ".xml"] = voc_xml(rec);
    }
    return files;
}

std::size_t AnnotationService::box_count() const
{
    const auto st = load();
    std::size_t n = 0;
    for (const auto& [id, doc] : st->images) n += doc->boxes.size();
    return n;
}

std::string AnnotationService::snapshot_json() const
{
    const auto st = load();
    json images = json::array();
    for (const auto& [id, doc] : st->images) images.push_back(to_json(*doc));
    json identities = json::array();
    for (const auto& [id, doc] : st->identities) identities.push_back(to_json(*doc));
    return dump_stable(json{{"images", std::move(images)}, {"identities", std::move(identities)}});
}

namespace {

std::string xml_escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&apos;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string num(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void octal(char* field, std::size_t width, std::uint64_t value)
{
    std::snprintf(field, width, "%0*llo", static_cast<int>(width - 1), static_cast<unsigned long long>(value));
}

}  // namespace

std::string voc_xml(const ImageRecord& rec)
{
    std::ostringstream os;
    os << "<annotation>\n";
    os << "  <folder>images</folder>\n";
    os << "  <filename>" << xml_escape(rec.image_id) << ".jpg</filename>\n";
    os << "  <size>\n    <width>" << rec.pano.width_px << "</width>\n    <height>" << rec.pano.height_px
       << "</height>\n    <depth>3</depth>\n  </size>\n";
    os << "  <camera lat=\"" << num(rec.camera.location.lat_deg) << "\" lng=\"" << num(rec.camera.location.lng_deg)
       << "\" yaw_deg=\"" << num(rec.camera.yaw_deg) << "\" height_m=\"" << num(rec.camera.height_m) << "\"/>\n";
    for (const auto& gt : rec.ground_truth) {
        os << "  <object";
        if (!gt.box_id.empty()) os << " box_id=\"" << xml_escape(gt.box_id) << "\"";
        if (gt.instance_id) os << " instance_id=\"" << xml_escape(*gt.instance_id) << "\"";
        os << ">\n";
        os << "    <name>" << gt.class_label << "</name>\n";
        os << "    <truncated>" << (gt.box.x_max > rec.pano.width_px ? 1 : 0) << "</truncated>\n";
        os << "    <difficult>0</difficult>\n";
        os << "    <bndbox>\n      <xmin>" << num(gt.box.x_min) << "</xmin>\n      <ymin>" << num(gt.box.y_min)
           << "</ymin>\n      <xmax>" << num(gt.box.x_max) << "</xmax>\n      <ymax>" << num(gt.box.y_max)
           << "</ymax>\n    </bndbox>\n";
        if (gt.geo) {
            os << "    <geo lat=\"" << num(gt.geo->lat_deg) << "\" lng=\"" << num(gt.geo->lng_deg) << "\"/>\n";
        }
        os << "  </object>\n";
    }
    os << "</annotation>\n";
    return os.str();
}

std::string make_tar(const std::map<std::string, std::string>& members)
{
    std::string out;
    for (const auto& [name, content] : members) {
        if (name.size() > 100) throw Error(ErrorCode::IoError, "archive member name too long: " + name);
        char header[512] = {};
        std::memcpy(header, name.data(), name.size());
        octal(header + 100, 8, 0644);
        octal(header + 108, 8, 0);
        octal(header + 116, 8, 0);
        octal(header + 124, 12, content.size());
        octal(header + 136, 12, 0);
        std::memset(header + 148, ' ', 8);
        header[156] = '0';
        std::memcpy(header + 257, "ustar", 6);
        std::memcpy(header + 263, "00", 2);
        unsigned sum = 0;
        for (unsigned char c : header) sum += c;
        std::snprintf(header + 148, 8, "%06o", sum);
        header[155] = ' ';
        out.append(header, sizeof header);
        out += content;
        out.append((512 - content.size() % 512) % 512, '\0');
    }
    out.append(1024, '\0');
    return out;
}

std::map<std::string, std::string> read_tar(const std::string& archive)
{
    std::map<std::string, std::string> out;
    std::size_t pos = 0;
    while (pos + 512 <= archive.size()) {
        const char* h = archive.data() + pos;
        if (h[0] == '\0') break;
        const std::string name(h, strnlen(h, 100));
        const std::size_t size = std::stoull(std::string(h + 124, strnlen(h + 124, 12)), nullptr, 8);
        pos += 512;
        if (pos + size > archive.size()) throw Error(ErrorCode::ParseError, "truncated archive member " + name);
        out[name] = archive.substr(pos, size);
        pos += (size + 511) / 512 * 512;
    }
    return out;
}

}  // namespace mvgeo
