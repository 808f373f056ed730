#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "svgsmith/llm.hpp"
#include "svgsmith/optim.hpp"
#include "svgsmith/raster.hpp"
#include "svgsmith/shape_prior.hpp"
#include "svgsmith/svg.hpp"

namespace svgsmith::session {

struct AddedOps {
  std::string start_path_id;  ///< insert after this pre-edit id; empty = document head
  std::vector<std::string> ids;
  bool operator==(const AddedOps&) const = default;
};

struct EditOps {
  std::vector<std::string> modified;  ///< pre-edit ids
  std::vector<std::string> removed;   ///< pre-edit ids
  AddedOps added;                     ///< ids are post-edit (renumbered) once returned by apply_edit
  bool empty() const { return modified.empty() && removed.empty() && added.ids.empty(); }
  bool operator==(const EditOps&) const = default;
};

/// Reads the "Element Modification / Removal / Addition" lines of an edit
/// reply. nullopt when none of the three lines is present.
std::optional<EditOps> parse_operation_summary(std::string_view reply);

/// Id diff between the current document and an edited script. Ids are as
/// they appear in each; a path present in both counts as modified when its
/// geometry, style or transform differ.
EditOps diff_documents(const svg::Document& pre, const svg::Document& post);

struct HistoryEntry {
  std::string instruction;
  svg::Document pre_doc;
  svg::Document post_doc;  ///< edited and renumbered, before optimization
  EditOps ops;
  svg::Document optimized_doc;
  std::vector<std::string> warnings;
  std::string target_hash;  ///< asset holding the target image; empty when none was needed
  bool operator==(const HistoryEntry&) const = default;
};

struct EditSession {
  std::string session_id;
  std::string prompt;
  svg::Document initial;
  std::vector<HistoryEntry> history;
  svg::Document current;

  /// Optimized geometry of every current path, keyed by id.
  std::map<std::string, svg::Path> frozen_geometry() const;
  bool operator==(const EditSession&) const = default;
};

std::string new_session_id();
EditSession new_session(std::string session_id, std::string prompt, svg::Document doc);

struct EditResult {
  EditOps ops;
  /// Post-edit document: ids path_1..M, unchanged paths restored from the
  /// frozen geometry, edited paths as the script gave them.
  svg::Document doc;
  std::map<std::string, std::string> renamed;  ///< pre-edit id -> post-edit id, every surviving path
  std::optional<EditOps> claimed;              ///< the reply's own summary, as written
  std::vector<std::string> warnings;
  std::string reply;
};

/// Sends the editing prompt with the current script. One corrective re-ask
/// when the reply has no usable script.
EditResult apply_edit(const EditSession& session, llm::ChatTransport& transport, std::string_view instruction);

/// Reconciles an already obtained reply with the session's current document.
EditResult reconcile_edit(const EditSession& session, const std::string& reply);

struct SelectiveResult {
  svg::Document doc;
  std::vector<std::string> failed;  ///< post-edit ids that kept their template geometry
  std::vector<std::string> warnings;
  std::vector<optim::LossTerms> latent_trace;
  std::vector<optim::LossTerms> point_trace;
  bool optimized = false;  ///< false when nothing was active
  bool cancelled = false;
};

/// Optimizes modified and added paths only. `target` may be null when the
/// edit activates no path.
SelectiveResult selective_optimize(const EditResult& edit, const raster::RasterImage* target,
                                   const optim::OptimizationConfig& cfg, const shape::ShapeDecoder& decoder,
                                   const optim::ProgressFn& progress = {});

/// Appends a history entry and moves `current` to the optimized document.
void commit(EditSession& session, std::string instruction, const EditResult& edit, const SelectiveResult& opt,
            std::string target_hash = {});

/// Supplies the target image for a post-edit document.
using TargetFn = std::function<raster::RasterImage(const svg::Document& post_doc)>;

struct EditRun {
  EditResult edit;
  SelectiveResult optimized;
  std::vector<std::uint8_t> target_png;  ///< empty for edits that activate nothing
};

/// Target (only when something is active), selective_optimize, and commit
/// unless cancelled.
EditRun complete_edit(EditSession& session, std::string_view instruction, EditResult edit, const TargetFn& target,
                      const optim::OptimizationConfig& cfg, const shape::ShapeDecoder& decoder,
                      const optim::ProgressFn& progress = {});

/// apply_edit followed by complete_edit.
EditRun run_edit(EditSession& session, llm::ChatTransport& transport, std::string_view instruction,
                 const TargetFn& target, const optim::OptimizationConfig& cfg, const shape::ShapeDecoder& decoder,
                 const optim::ProgressFn& progress = {});

/// Re-runs every recorded instruction from the session's initial document.
EditSession replay(const EditSession& recorded, llm::ChatTransport& transport, const TargetFn& target,
                   const optim::OptimizationConfig& cfg, const shape::ShapeDecoder& decoder);

inline constexpr int kSchemaVersion = 1;

std::string save_session(const EditSession& session);
/// FormatError on a corrupt payload, VersionError on another schema version.
EditSession load_session(std::string_view payload);

/// <root>/<session_id>/session.json and <root>/<session_id>/assets/<sha256>.png.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path root);

  void save(const EditSession& session) const;
  EditSession load(const std::string& session_id) const;
  bool exists(const std::string& session_id) const;
  std::vector<std::string> list() const;
  /// Stores bytes as assets/<sha256>.<ext> and returns the file name.
  std::string put_asset(const std::string& session_id, std::string_view bytes, const std::string& ext = "png") const;
  std::string put_asset(const std::string& session_id, const std::vector<std::uint8_t>& png) const;
  /// Reads assets/<name>; `name` is a value returned by put_asset.
  std::string asset(const std::string& session_id, const std::string& name) const;
  void remove(const std::string& session_id) const;
  std::filesystem::path dir(const std::string& session_id) const;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

/// One writer per session id. A lease may be released from any thread, so it
/// can travel with a background job.
class EditLocks {
 public:
  class Lease {
   public:
    Lease() = default;
    Lease(Lease&& o) noexcept : owner_(std::exchange(o.owner_, nullptr)), id_(std::move(o.id_)) {}
    Lease& operator=(Lease&& o) noexcept;
    Lease(const Lease&) = delete;
    Lease& operator=(const Lease&) = delete;
    ~Lease() { release(); }

    bool owns() const { return owner_ != nullptr; }
    explicit operator bool() const { return owns(); }
    void release();

   private:
    friend class EditLocks;
    Lease(EditLocks* owner, std::string id) : owner_(owner), id_(std::move(id)) {}
    EditLocks* owner_ = nullptr;
    std::string id_;
  };

  /// An owning lease, or an empty one when the session is busy.
  Lease try_acquire(const std::string& session_id);
  bool busy(const std::string& session_id) const;

 private:
  mutable std::mutex guard_;
  std::set<std::string> held_;
};

}  // namespace svgsmith::session
