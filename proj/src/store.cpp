#include "dialign/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dialign {

namespace {

[[noreturn]] void io_failure(const std::string& what, const fs::path& path) {
  throw Error(ErrorCode::IoError, what + ": " + std::strerror(errno), path.string());
}

void sync_directory(const fs::path& dir) {
  int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

std::atomic<unsigned long> temp_counter{0};

}  // namespace

void atomic_write(const fs::path& target, std::string_view bytes, const FaultHook& hook) {
  const fs::path dir = target.parent_path();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

  const fs::path temp = dir / ("." + target.filename().string() + "." +
                               std::to_string(::getpid()) + "." +
                               std::to_string(temp_counter++) + ".tmp");
  int fd = ::open(temp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) io_failure("cannot create temp file", temp);
  std::size_t written = 0;
  while (written < bytes.size()) {
    ssize_t n = ::write(fd, bytes.data() + written, bytes.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      ::unlink(temp.c_str());
      io_failure("write failed", temp);
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0 || ::close(fd) != 0) {
    ::unlink(temp.c_str());
    io_failure("flush failed", temp);
  }
  if (hook) hook(temp, target);
  if (::rename(temp.c_str(), target.c_str()) != 0) {
    ::unlink(temp.c_str());
    io_failure("rename failed", target);
  }
  sync_directory(dir);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string(), path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoError, "cannot read " + path.string(), path.string());
  return std::move(buf).str();
}

bool is_valid_name(std::string_view name) {
  if (name.empty() || name.size() > 128 || name.front() == '.') return false;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    if (!ok) return false;
  }
  return true;
}

// --- edits --------------------------------------------------------------------

namespace {

Dialogue& require_dialogue(DialogueCollection& c, const std::string& id) {
  Dialogue* d = c.find(id);
  if (d == nullptr) throw Error(ErrorCode::UnknownDialogue, "no dialogue '" + id + "'", id);
  return *d;
}

void require_turn(const Dialogue& d, std::size_t index) {
  if (index >= d.turns.size())
    throw Error(ErrorCode::UnknownTurn,
                "dialogue '" + d.id + "' has no turn " + std::to_string(index),
                d.id + "/turns/" + std::to_string(index));
}

}  // namespace

DialogueCollection apply_edit(const DialogueCollection& current, const LabelSchema& schema,
                              const DatasetEdit& edit, EditOutcome& outcome) {
  DialogueCollection next = current;
  std::visit(
      [&](const auto& e) {
        using E = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<E, AddDialogue>) {
          Dialogue d;
          d.id = next_dialogue_id(next);
          d.name = e.name.value_or(d.id);
          outcome.dialogue_id = d.id;
          next.dialogues.push_back(std::move(d));
        } else if constexpr (std::is_same_v<E, RenameDialogue>) {
          require_dialogue(next, e.id).name = e.name;
          outcome.dialogue_id = e.id;
        } else if constexpr (std::is_same_v<E, ReplaceDialogue>) {
          Dialogue& d = require_dialogue(next, e.id);
          d = e.dialogue;
          d.id = e.id;
          reindex(d);
          outcome.dialogue_id = e.id;
        } else if constexpr (std::is_same_v<E, DeleteDialogue>) {
          require_dialogue(next, e.id);
          std::erase_if(next.dialogues, [&](const Dialogue& d) { return d.id == e.id; });
          outcome.dialogue_id = e.id;
        } else if constexpr (std::is_same_v<E, AddTurn>) {
          Dialogue& d = require_dialogue(next, e.id);
          d.turns.push_back(e.turn);
          d.turns.back().index = d.turns.size() - 1;
          outcome.dialogue_id = e.id;
          outcome.turn_index = d.turns.size() - 1;
        } else if constexpr (std::is_same_v<E, UpdateTurn>) {
          Dialogue& d = require_dialogue(next, e.id);
          require_turn(d, e.index);
          d.turns[e.index] = e.turn;
          d.turns[e.index].index = e.index;
          outcome.dialogue_id = e.id;
          outcome.turn_index = e.index;
        } else if constexpr (std::is_same_v<E, DeleteTurn>) {
          Dialogue& d = require_dialogue(next, e.id);
          require_turn(d, e.index);
          d.turns.erase(d.turns.begin() + static_cast<std::ptrdiff_t>(e.index));
          reindex(d);
          outcome.dialogue_id = e.id;
        }
      },
      edit);

  // Only the touched dialogue can have changed; opaque labels from a lenient
  // ingest are carried along untouched.
  if (const Dialogue* d = next.find(outcome.dialogue_id)) validate_dialogue(schema, *d, "/" + d->id);
  return next;
}

// --- workspace ------------------------------------------------------------------

Workspace::Workspace(fs::path root, WorkspaceOptions options) : root_(std::move(root)) {
  std::error_code ec;
  if (!fs::is_directory(root_, ec))
    throw Error(ErrorCode::IoError, "workspace root is not a directory", root_.string());

  parse_options_.allow_unknown_labels = options.allow_unknown_labels;
  if (options.schema) {
    schema_ = std::move(options.schema);
  } else if (fs::exists(root_ / "schema.json")) {
    try {
      schema_ = load_schema(read_file(root_ / "schema.json"));
    } catch (const Error& e) {
      issues_.emplace_back(ErrorCode::CorruptFile, e.what(), (root_ / "schema.json").string());
    }
  }
  if (!schema_) parse_options_.allow_unknown_labels = true;

  auto json_files = [&](const fs::path& dir) {
    std::vector<fs::path> out;
    if (!fs::is_directory(dir, ec)) return out;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
      const auto& p = entry.path();
      if (entry.is_regular_file() && p.extension() == ".json" && is_valid_name(p.stem().string()))
        out.push_back(p);
    }
    std::sort(out.begin(), out.end());
    return out;
  };

  const LabelSchema& effective = schema_ ? *schema_ : empty_schema_;
  for (const auto& path : json_files(root_ / "datasets")) {
    try {
      auto collection = parse(read_file(path), effective, parse_options_);
      auto slot = std::make_shared<DatasetSlot>();
      slot->value = std::make_shared<const DialogueCollection>(std::move(collection));
      datasets_.emplace(path.stem().string(), std::move(slot));
    } catch (const Error& e) {
      issues_.emplace_back(ErrorCode::CorruptFile, e.what(), path.string());
    }
  }
  for (const auto& path : json_files(root_ / "sessions")) {
    try {
      auto session = parse_session(read_file(path), path.stem().string(), effective);
      auto slot = std::make_shared<SessionSlot>();
      slot->value = std::make_shared<const ResolutionSession>(std::move(session));
      sessions_.emplace(path.stem().string(), std::move(slot));
    } catch (const Error& e) {
      issues_.emplace_back(ErrorCode::CorruptFile, e.what(), path.string());
    }
  }
}

const LabelSchema& Workspace::require_schema() const {
  if (!schema_)
    throw Error(ErrorCode::SchemaMissing, "workspace has no label schema",
                (root_ / "schema.json").string());
  return *schema_;
}

fs::path Workspace::dataset_path(const std::string& name) const {
  return root_ / "datasets" / (name + ".json");
}

fs::path Workspace::session_path(const std::string& id) const {
  return root_ / "sessions" / (id + ".json");
}

void Workspace::set_fault_hook(FaultHook hook) {
  std::unique_lock lock(index_mutex_);
  fault_hook_ = std::move(hook);
}

void Workspace::write(const fs::path& target, std::string_view bytes) const {
  FaultHook hook;
  {
    std::shared_lock lock(index_mutex_);
    hook = fault_hook_;
  }
  atomic_write(target, bytes, hook);
}

template <class T>
std::shared_ptr<const T> Workspace::snapshot(const Slot<T>& slot) const {
  std::shared_lock lock(index_mutex_);
  return slot.value;
}

template <class T>
void Workspace::publish(Slot<T>& slot, std::shared_ptr<const T> value) {
  std::unique_lock lock(index_mutex_);
  slot.value = std::move(value);
}

std::shared_ptr<Workspace::DatasetSlot> Workspace::dataset_slot(const std::string& name) const {
  std::shared_lock lock(index_mutex_);
  auto it = datasets_.find(name);
  if (it == datasets_.end()) throw Error(ErrorCode::UnknownDataset, "no dataset '" + name + "'", name);
  return it->second;
}

std::shared_ptr<Workspace::SessionSlot> Workspace::session_slot(const std::string& id) const {
  std::shared_lock lock(index_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session '" + id + "'", id);
  return it->second;
}

std::vector<std::string> Workspace::dataset_names() const {
  std::shared_lock lock(index_mutex_);
  std::vector<std::string> names;
  for (const auto& [name, slot] : datasets_) names.push_back(name);
  return names;
}

std::shared_ptr<const DialogueCollection> Workspace::dataset(const std::string& name) const {
  return snapshot(*dataset_slot(name));
}

std::shared_ptr<const DialogueCollection> Workspace::create_dataset(
    const std::string& name, DialogueCollection collection) {
  if (!is_valid_name(name))
    throw Error(ErrorCode::ValidationError,
                "dataset names may only use letters, digits, '-', '_' and '.'", name);
  validate_collection(schema_ ? *schema_ : empty_schema_, collection);
  if (collection.name.empty()) collection.name = name;
  auto value = std::make_shared<const DialogueCollection>(std::move(collection));

  auto slot = std::make_shared<DatasetSlot>();
  std::unique_lock writer(slot->writer);
  {
    std::unique_lock lock(index_mutex_);
    if (datasets_.count(name) != 0)
      throw Error(ErrorCode::DatasetExists, "dataset '" + name + "' already exists", name);
    slot->value = value;
    datasets_.emplace(name, slot);
  }
  try {
    write(dataset_path(name), serialize(*value));
  } catch (...) {
    std::unique_lock lock(index_mutex_);
    datasets_.erase(name);
    throw;
  }
  return value;
}

EditOutcome Workspace::mutate(const std::string& dataset, const DatasetEdit& edit) {
  auto slot = dataset_slot(dataset);
  std::unique_lock writer(slot->writer);
  EditOutcome outcome;
  auto next = std::make_shared<const DialogueCollection>(
      apply_edit(*snapshot(*slot), schema_ ? *schema_ : empty_schema_, edit, outcome));
  write(dataset_path(dataset), serialize(*next));
  publish(*slot, next);
  outcome.state = std::move(next);
  return outcome;
}

void Workspace::save_dataset(const std::string& name) {
  auto slot = dataset_slot(name);
  std::unique_lock writer(slot->writer);
  write(dataset_path(name), serialize(*snapshot(*slot)));
}

std::vector<std::string> Workspace::session_ids() const {
  std::shared_lock lock(index_mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, slot] : sessions_)
    if (slot->value) ids.push_back(id);
  return ids;
}

std::shared_ptr<const ResolutionSession> Workspace::session(const std::string& id) const {
  auto value = snapshot(*session_slot(id));
  if (!value) throw Error(ErrorCode::UnknownSession, "no session '" + id + "'", id);
  return value;
}

std::string Workspace::next_session_id() const {
  unsigned long top = 0;
  for (const auto& [id, slot] : sessions_) {
    if (id.rfind("session-", 0) != 0) continue;
    try {
      top = std::max(top, std::stoul(id.substr(8)));
    } catch (const std::exception&) {
    }
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "session-%04lu", top + 1);
  return buf;
}

std::shared_ptr<const ResolutionSession> Workspace::create_session(AnnotationSet set) {
  const LabelSchema& schema = require_schema();
  auto slot = std::make_shared<SessionSlot>();
  std::unique_lock writer(slot->writer);
  std::string id;
  {
    std::unique_lock lock(index_mutex_);
    id = next_session_id();
    sessions_.emplace(id, slot);
  }
  try {
    auto value = std::make_shared<const ResolutionSession>(open_session(id, std::move(set), schema));
    write(session_path(id), serialize_session(*value));
    publish(*slot, value);
    return value;
  } catch (...) {
    std::unique_lock lock(index_mutex_);
    sessions_.erase(id);
    throw;
  }
}

Disagreement Workspace::accept(const std::string& session_id, std::size_t turn,
                               const std::string& label, std::optional<LabelValue> value) {
  const LabelSchema& schema = require_schema();
  auto slot = session_slot(session_id);
  std::unique_lock writer(slot->writer);
  auto current = snapshot(*slot);
  if (!current) throw Error(ErrorCode::UnknownSession, "no session '" + session_id + "'", session_id);
  auto next = std::make_shared<ResolutionSession>(*current);
  Disagreement updated = dialign::accept(*next, schema, turn, label, std::move(value));
  write(session_path(session_id), serialize_session(*next));
  publish<ResolutionSession>(*slot, std::move(next));
  return updated;
}

void Workspace::save_session(const std::string& id) {
  auto slot = session_slot(id);
  std::unique_lock writer(slot->writer);
  write(session_path(id), serialize_session(*snapshot(*slot)));
}

}  // namespace dialign
