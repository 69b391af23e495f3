#include "chart_refinery/session/store.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <system_error>
#include <utility>

#include "chart_refinery/error.hpp"
#include "chart_refinery/session/hashing.hpp"

namespace chart_refinery {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json image_ref(const ChartImage& image) {
  return {{"id", image.id},
          {"format", to_string(image.format)},
          {"width_px", image.width_px},
          {"height_px", image.height_px},
          {"sha256", image.sha256}};
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

json render_to_json(const RenderResult& r) {
  json j{{"status", to_string(r.status)},
         {"image", r.image ? image_ref(*r.image) : json(nullptr)},
         {"stderr_excerpt", r.stderr_excerpt},
         {"duration_ms", r.duration_ms},
         {"svg_sha256", r.svg ? json(sha256_hex(*r.svg)) : json(nullptr)}};
  return j;
}

using BlobLoader = std::function<std::vector<std::uint8_t>(const std::string&)>;

ChartImage image_from_json(const json& j, const BlobLoader& load_blob) {
  ChartImage image;
  image.id = j.at("id").get<std::string>();
  image.format = image_format_from_string(j.at("format").get<std::string>());
  image.width_px = j.at("width_px").get<int>();
  image.height_px = j.at("height_px").get<int>();
  image.sha256 = j.at("sha256").get<std::string>();
  image.bytes = load_blob(image.sha256);
  if (auto problem = check_image(image); !problem.empty()) {
    throw Error(ErrorCode::kCorruptRecord, "stored image invalid: " + problem);
  }
  return image;
}

RenderResult render_from_json(const json& j, const BlobLoader& load_blob) {
  RenderResult r;
  r.status = render_status_from_string(j.at("status").get<std::string>());
  if (!j.at("image").is_null()) r.image = image_from_json(j.at("image"), load_blob);
  r.stderr_excerpt = j.at("stderr_excerpt").get<std::string>();
  r.duration_ms = j.at("duration_ms").get<std::int64_t>();
  if (!j.at("svg_sha256").is_null()) {
    auto bytes = load_blob(j.at("svg_sha256").get<std::string>());
    r.svg = std::string(bytes.begin(), bytes.end());
  }
  return r;
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kInternal, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kInternal, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 128) return false;
  for (char c : id) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
  }
  return true;
}

}  // namespace

json session_to_json(const Session& s) {
  json revisions = json::array();
  for (const auto& rev : s.revisions) {
    revisions.push_back({
        {"index", rev.index},
        {"spec",
         {{"source", rev.spec.source},
          {"origin", to_string(rev.spec.origin)},
          {"parent_revision", optional_json(rev.spec.parent_revision)},
          {"validated", rev.spec.validated}}},
        {"applied_recommendation_ids", rev.applied_recommendation_ids},
        {"render", rev.render ? render_to_json(*rev.render) : json(nullptr)},
        {"created_at", format_rfc3339(rev.created_at)},
    });
  }
  json recs = json::array();
  for (const auto& r : s.recommendations) {
    recs.push_back({{"id", r.id},
                    {"session_id", r.session_id},
                    {"round", r.round},
                    {"text", r.text},
                    {"raw_line", r.raw_line},
                    {"status", to_string(r.status)},
                    {"category", optional_json(r.category)}});
  }
  json raw = json::array();
  for (const auto& c : s.raw_completions) {
    raw.push_back({{"round", c.round},
                   {"kind", c.kind},
                   {"text", c.text},
                   {"at", format_rfc3339(c.at)}});
  }
  json audit = json::array();
  for (const auto& a : s.audit) {
    audit.push_back({{"at", format_rfc3339(a.at)}, {"event", a.event}, {"detail", a.detail}});
  }
  return {{"schema_version", kSessionSchemaVersion},
          {"id", s.id},
          {"state", to_string(s.state)},
          {"created_at", format_rfc3339(s.created_at)},
          {"image", image_ref(s.image)},
          {"revisions", std::move(revisions)},
          {"recommendations", std::move(recs)},
          {"backend_config_snapshot", s.backend_config_snapshot},
          {"raw_completions", std::move(raw)},
          {"audit", std::move(audit)}};
}

Session session_from_json(const json& doc, const BlobLoader& load_blob) {
  try {
    if (!doc.is_object()) throw Error(ErrorCode::kCorruptRecord, "session document is not an object");
    if (doc.at("schema_version").get<int>() != kSessionSchemaVersion) {
      throw Error(ErrorCode::kCorruptRecord,
                  "unsupported schema_version " + doc.at("schema_version").dump());
    }
    Session s;
    s.id = doc.at("id").get<std::string>();
    s.state = session_state_from_string(doc.at("state").get<std::string>());
    s.created_at = parse_rfc3339(doc.at("created_at").get<std::string>());
    s.image = image_from_json(doc.at("image"), load_blob);
    for (const auto& jr : doc.at("revisions")) {
      Revision rev;
      rev.index = jr.at("index").get<int>();
      const auto& js = jr.at("spec");
      rev.spec.source = js.at("source").get<std::string>();
      rev.spec.origin = spec_origin_from_string(js.at("origin").get<std::string>());
      if (!js.at("parent_revision").is_null()) {
        rev.spec.parent_revision = js.at("parent_revision").get<int>();
      }
      rev.spec.validated = js.at("validated").get<bool>();
      rev.applied_recommendation_ids =
          jr.at("applied_recommendation_ids").get<std::vector<std::string>>();
      if (!jr.at("render").is_null()) rev.render = render_from_json(jr.at("render"), load_blob);
      rev.created_at = parse_rfc3339(jr.at("created_at").get<std::string>());
      s.revisions.push_back(std::move(rev));
    }
    for (const auto& jr : doc.at("recommendations")) {
      Recommendation r;
      r.id = jr.at("id").get<std::string>();
      r.session_id = jr.at("session_id").get<std::string>();
      r.round = jr.at("round").get<int>();
      r.text = jr.at("text").get<std::string>();
      r.raw_line = jr.at("raw_line").get<std::string>();
      r.status = rec_status_from_string(jr.at("status").get<std::string>());
      if (!jr.at("category").is_null()) r.category = jr.at("category").get<std::string>();
      s.recommendations.push_back(std::move(r));
    }
    s.backend_config_snapshot = doc.at("backend_config_snapshot");
    for (const auto& jc : doc.at("raw_completions")) {
      s.raw_completions.push_back({jc.at("round").get<int>(), jc.at("kind").get<std::string>(),
                                   jc.at("text").get<std::string>(),
                                   parse_rfc3339(jc.at("at").get<std::string>())});
    }
    for (const auto& ja : doc.at("audit")) {
      s.audit.push_back({parse_rfc3339(ja.at("at").get<std::string>()),
                         ja.at("event").get<std::string>(), ja.at("detail")});
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptRecord, std::string("session schema violation: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kCorruptRecord) throw;
    throw Error(ErrorCode::kCorruptRecord, e.what());
  }
}

std::string dump_session_document(const Session& session) {
  return session_to_json(session).dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

SessionStore::SessionStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "sessions");
}

fs::path SessionStore::session_dir(const std::string& id) const {
  if (!valid_id(id)) throw Error(ErrorCode::kNotFound, "invalid session id: " + id);
  return root_ / "sessions" / id;
}

fs::path SessionStore::blob_path(const std::string& id, const std::string& sha) const {
  return session_dir(id) / "blobs" / sha;
}

void SessionStore::write_blob(const std::string& id, const std::string& sha,
                              std::span<const std::uint8_t> bytes) const {
  fs::path path = blob_path(id, sha);
  if (fs::exists(path)) return;  // content-addressed
  write_file_atomic(path, bytes);
}

void SessionStore::write_blob(const std::string& id, const ChartImage& image) const {
  write_blob(id, image.sha256, image.bytes);
}

void SessionStore::save(const Session& session) const {
  fs::path dir = session_dir(session.id);
  fs::create_directories(dir / "blobs");
  write_blob(session.id, session.image);
  for (const auto& rev : session.revisions) {
    if (!rev.render) continue;
    if (rev.render->image) write_blob(session.id, *rev.render->image);
    if (rev.render->svg) {
      const auto& svg = *rev.render->svg;
      write_blob(session.id, sha256_hex(svg),
                 std::span<const std::uint8_t>(
                     reinterpret_cast<const std::uint8_t*>(svg.data()), svg.size()));
    }
  }
  std::string doc = dump_session_document(session);
  write_file_atomic(dir / "session.json",
                    std::span<const std::uint8_t>(
                        reinterpret_cast<const std::uint8_t*>(doc.data()), doc.size()));
}

bool SessionStore::exists(const std::string& id) const {
  return valid_id(id) && fs::exists(root_ / "sessions" / id / "session.json");
}

Session SessionStore::load(const std::string& id) const {
  if (!exists(id)) throw Error(ErrorCode::kNotFound, "session not found: " + id);
  auto bytes = read_file(session_dir(id) / "session.json");
  json doc = json::parse(bytes.begin(), bytes.end(), nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) {
    throw Error(ErrorCode::kCorruptRecord, "session.json for " + id + " is not valid JSON");
  }
  Session s = session_from_json(doc, [&](const std::string& sha) {
    fs::path path = blob_path(id, sha);
    if (!fs::exists(path)) {
      throw Error(ErrorCode::kCorruptRecord, "missing blob " + sha);
    }
    auto blob = read_file(path);
    if (sha256_hex(blob) != sha) {
      throw Error(ErrorCode::kCorruptRecord, "blob " + sha + " does not match its hash");
    }
    return blob;
  });
  if (s.id != id) throw Error(ErrorCode::kCorruptRecord, "session id mismatch in " + id);
  return s;
}

std::vector<std::string> SessionStore::list() const {
  std::vector<std::string> ids;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(root_ / "sessions", ec)) {
    if (entry.is_directory() && fs::exists(entry.path() / "session.json")) {
      ids.push_back(entry.path().filename().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

LeaseTable::Lease& LeaseTable::Lease::operator=(Lease&& other) noexcept {
  if (this != &other) {
    release();
    table_ = std::exchange(other.table_, nullptr);
    id_ = std::move(other.id_);
  }
  return *this;
}

void LeaseTable::Lease::release() {
  if (table_) std::exchange(table_, nullptr)->release(id_);
}

LeaseTable::Lease LeaseTable::try_acquire(const std::string& session_id) {
  std::lock_guard lock(mu_);
  if (!held_.insert(session_id).second) return Lease{};
  return Lease{this, session_id};
}

LeaseTable::Lease LeaseTable::acquire(const std::string& session_id) {
  std::unique_lock lock(mu_);
  freed_.wait(lock, [&] { return !held_.contains(session_id); });
  held_.insert(session_id);
  return Lease{this, session_id};
}

void LeaseTable::release(const std::string& session_id) {
  {
    std::lock_guard lock(mu_);
    held_.erase(session_id);
  }
  freed_.notify_all();
}

}  // namespace chart_refinery
