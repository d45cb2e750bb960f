#pragma once

// File-backed workspace:
//
//   <root>/schema.json
//   <root>/datasets/<name>.json     canonical dataset JSON
//   <root>/sessions/<id>.json       resolution sessions
//
// Every mutation and every accepted resolution is written straight away with
// an atomic temp-file + rename. Readers get immutable snapshots; writers are
// serialized per dataset / per session.

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

#include "dialign/agreement.hpp"
#include "dialign/error.hpp"
#include "dialign/model.hpp"
#include "dialign/session.hpp"

namespace dialign {

namespace fs = std::filesystem;

// Called after the temp file is durable and before it is renamed over the
// target. Throwing from it simulates a crash at that point.
using FaultHook = std::function<void(const fs::path& temp, const fs::path& target)>;

// Writes `bytes` to `target` so that readers see either the old or the new
// content, never a partial file. Throws Error{IoError}.
void atomic_write(const fs::path& target, std::string_view bytes, const FaultHook& hook = {});

// Reads a whole file. Throws Error{IoError}.
std::string read_file(const fs::path& path);

// Dataset and session names double as file names.
bool is_valid_name(std::string_view name);

// --- dataset edits ------------------------------------------------------------

struct AddDialogue {
  std::optional<std::string> name;
};
struct RenameDialogue {
  std::string id;
  std::string name;
};
struct ReplaceDialogue {
  std::string id;
  Dialogue dialogue;  // id is forced to `id`, turns are reindexed
};
struct DeleteDialogue {
  std::string id;
};
struct AddTurn {
  std::string id;
  Turn turn;
};
struct UpdateTurn {
  std::string id;
  std::size_t index = 0;
  Turn turn;
};
struct DeleteTurn {
  std::string id;
  std::size_t index = 0;
};

using DatasetEdit = std::variant<AddDialogue, RenameDialogue, ReplaceDialogue, DeleteDialogue,
                                 AddTurn, UpdateTurn, DeleteTurn>;

struct EditOutcome {
  std::shared_ptr<const DialogueCollection> state;
  std::string dialogue_id;                // dialogue the edit touched
  std::optional<std::size_t> turn_index;  // turn the edit touched, if any
};

// Pure part of mutate(): applies the edit to a copy and validates the result.
DialogueCollection apply_edit(const DialogueCollection& current, const LabelSchema& schema,
                              const DatasetEdit& edit, EditOutcome& outcome);

struct WorkspaceOptions {
  // Used instead of <root>/schema.json when set.
  std::optional<LabelSchema> schema;
  bool allow_unknown_labels = false;
};

class Workspace {
 public:
  // Loads every dataset and session. Unreadable or invalid files are skipped
  // and reported through load_issues(). Throws Error{IoError} if `root` is not
  // a directory.
  explicit Workspace(fs::path root, WorkspaceOptions options = {});

  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;

  const fs::path& root() const { return root_; }
  // Null when no schema file exists (or it failed to load).
  const LabelSchema* schema() const { return schema_ ? &*schema_ : nullptr; }
  const LabelSchema& require_schema() const;
  const std::vector<Error>& load_issues() const { return issues_; }
  const ParseOptions& parse_options() const { return parse_options_; }

  fs::path dataset_path(const std::string& name) const;
  fs::path session_path(const std::string& id) const;

  void set_fault_hook(FaultHook hook);

  // --- datasets ---
  std::vector<std::string> dataset_names() const;
  // Throws UnknownDataset.
  std::shared_ptr<const DialogueCollection> dataset(const std::string& name) const;
  // Throws DatasetExists, ValidationError (bad name), validation errors.
  std::shared_ptr<const DialogueCollection> create_dataset(const std::string& name,
                                                           DialogueCollection collection);
  EditOutcome mutate(const std::string& dataset, const DatasetEdit& edit);
  void save_dataset(const std::string& name);

  // --- sessions ---
  std::vector<std::string> session_ids() const;
  // Throws UnknownSession.
  std::shared_ptr<const ResolutionSession> session(const std::string& id) const;
  std::shared_ptr<const ResolutionSession> create_session(AnnotationSet set);
  // Accepts and autosaves; returns the updated disagreement.
  Disagreement accept(const std::string& session_id, std::size_t turn, const std::string& label,
                      std::optional<LabelValue> value = std::nullopt);
  void save_session(const std::string& id);

 private:
  template <class T>
  struct Slot {
    std::mutex writer;
    std::shared_ptr<const T> value;
  };
  using DatasetSlot = Slot<DialogueCollection>;
  using SessionSlot = Slot<ResolutionSession>;

  std::shared_ptr<DatasetSlot> dataset_slot(const std::string& name) const;
  std::shared_ptr<SessionSlot> session_slot(const std::string& id) const;
  template <class T>
  std::shared_ptr<const T> snapshot(const Slot<T>& slot) const;
  template <class T>
  void publish(Slot<T>& slot, std::shared_ptr<const T> value);
  void write(const fs::path& target, std::string_view bytes) const;
  std::string next_session_id() const;

  fs::path root_;
  std::optional<LabelSchema> schema_;
  LabelSchema empty_schema_;
  ParseOptions parse_options_;
  std::vector<Error> issues_;

  mutable std::shared_mutex index_mutex_;
  std::map<std::string, std::shared_ptr<DatasetSlot>> datasets_;
  std::map<std::string, std::shared_ptr<SessionSlot>> sessions_;
  FaultHook fault_hook_;
};

}  // namespace dialign
