#pragma once

#include <filesystem>
#include <memory>
#include <condition_variable>
#include <mutex>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "chart_refinery/session/session.hpp"

namespace chart_refinery {

inline constexpr int kSessionSchemaVersion = 1;

// Directory-per-session store:
//   <root>/sessions/<id>/session.json
//   <root>/sessions/<id>/blobs/<sha256>
// Image payloads (source and renders) live in blobs and are referenced by
// hash from the JSON document.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path session_dir(const std::string& id) const;
  std::filesystem::path blob_path(const std::string& id, const std::string& sha) const;

  void save(const Session& session) const;
  // Throws NotFound or CorruptRecord.
  Session load(const std::string& id) const;
  bool exists(const std::string& id) const;
  std::vector<std::string> list() const;

 private:
  void write_blob(const std::string& id, const ChartImage& image) const;
  void write_blob(const std::string& id, const std::string& sha,
                  std::span<const std::uint8_t> bytes) const;

  std::filesystem::path root_;
};

// JSON document codec. Decoding validates the schema and throws
// CorruptRecord; blobs are resolved through `load_blob`.
nlohmann::json session_to_json(const Session& session);
Session session_from_json(
    const nlohmann::json& doc,
    const std::function<std::vector<std::uint8_t>(const std::string&)>& load_blob);

// Serialized form written to session.json.
std::string dump_session_document(const Session& session);

// Per-session exclusive write leases held by the service layer. A lease is
// released when its handle is destroyed, from any thread.
class LeaseTable {
 public:
  class Lease {
   public:
    Lease() = default;
    Lease(Lease&& other) noexcept { *this = std::move(other); }
    Lease& operator=(Lease&& other) noexcept;
    Lease(const Lease&) = delete;
    Lease& operator=(const Lease&) = delete;
    ~Lease() { release(); }
    explicit operator bool() const { return table_ != nullptr; }

   private:
    friend class LeaseTable;
    Lease(LeaseTable* table, std::string id) : table_(table), id_(std::move(id)) {}
    void release();
    LeaseTable* table_ = nullptr;
    std::string id_;
  };

  // Empty lease when another holder has it.
  Lease try_acquire(const std::string& session_id);
  // Blocks until the lease is free.
  Lease acquire(const std::string& session_id);

 private:
  void release(const std::string& session_id);

  std::mutex mu_;
  std::condition_variable freed_;
  std::unordered_set<std::string> held_;
};

}  // namespace chart_refinery
