#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <unistd.h>

#include "json_util.hpp"
#include "plansmith/error.hpp"
#include "plansmith/hash.hpp"
#include "plansmith/trajectory.hpp"

namespace plansmith {

namespace fs = std::filesystem;
using nlohmann::json;
using detail::optional_field;
using detail::require;

namespace {

constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kShardFile = "trajectories.jsonl";

fs::path version_dir(const fs::path& root, int version) { return root / ("v" + std::to_string(version)); }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, std::string_view content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open " + p.string() + " for writing");
  out << content;
  out.flush();
  if (!out) throw Error(ErrorKind::io, "write failed for " + p.string());
}

std::string shard_bytes(const std::vector<Trajectory>& trajs) {
  std::string out;
  for (const auto& t : trajs) {
    out += to_jsonl_line(t);
    out += '\n';
  }
  return out;
}

std::vector<Trajectory> dedup(std::vector<Trajectory> in) {
  std::unordered_set<std::string> seen;
  std::vector<Trajectory> out;
  out.reserve(in.size());
  for (auto& t : in) {
    if (seen.insert(t.trajectory_id).second) out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"); sde && *sde) {
    char* end = nullptr;
    const long long v = std::strtoll(sde, &end, 10);
    if (end && *end == '\0') now = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void to_json(json& j, const DatasetManifest& m) {
  j = json{{"version", m.version},
           {"created_at", m.created_at},
           {"parent_version", m.parent_version ? json(*m.parent_version) : json(nullptr)},
           {"counts_by_source", m.counts_by_source},
           {"counts_by_difficulty", m.counts_by_difficulty},
           {"total", m.total},
           {"training",
            {{"optimizer", m.training.optimizer},
             {"stage_learning_rates",
              {m.training.stage1_learning_rate, m.training.stage2_learning_rate, m.training.stage3_learning_rate}},
             {"epochs", m.training.epochs}}},
           {"content_hash", m.content_hash},
           {"schema_version", kTrajectorySchemaVersion}};
}

void from_json(const json& j, DatasetManifest& m) {
  m.version = require<int>(j, "version");
  m.created_at = require<std::string>(j, "created_at");
  if (j.contains("parent_version") && !j.at("parent_version").is_null()) {
    m.parent_version = require<int>(j, "parent_version");
  } else {
    m.parent_version.reset();
  }
  m.counts_by_source = require<std::map<std::string, int>>(j, "counts_by_source");
  m.counts_by_difficulty = require<std::map<std::string, int>>(j, "counts_by_difficulty");
  m.total = require<int>(j, "total");
  const json training = require<json>(j, "training");
  m.training.optimizer = require<std::string>(training, "optimizer");
  const auto lrs = require<std::vector<double>>(training, "stage_learning_rates");
  if (lrs.size() != 3) throw Error(ErrorKind::parse, "field 'stage_learning_rates': expected 3 values");
  m.training.stage1_learning_rate = lrs[0];
  m.training.stage2_learning_rate = lrs[1];
  m.training.stage3_learning_rate = lrs[2];
  m.training.epochs = require<int>(training, "epochs");
  m.content_hash = require<std::string>(j, "content_hash");
}

std::set<std::string> DatasetVersion::trajectory_ids() const {
  std::set<std::string> ids;
  for (const auto& t : trajectories) ids.insert(t.trajectory_id);
  return ids;
}

bool DatasetVersion::contains(std::string_view id) const {
  for (const auto& t : trajectories) {
    if (t.trajectory_id == id) return true;
  }
  return false;
}

DatasetStore::DatasetStore(fs::path root, Clock clock) : root_(std::move(root)), clock_(std::move(clock)) {
  if (!clock_) clock_ = utc_timestamp;
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create dataset root " + root_.string() + ": " + ec.message());
}

DatasetVersion DatasetStore::seal(int version, std::optional<int> parent, std::vector<Trajectory> trajectories,
                                  const TrainingMetadata& training) {
  const fs::path final_dir = version_dir(root_, version);
  if (fs::exists(final_dir / kManifestFile)) {
    throw Error(ErrorKind::io, "dataset version " + std::to_string(version) + " is already sealed");
  }

  DatasetManifest m;
  m.version = version;
  m.created_at = clock_();
  m.parent_version = parent;
  m.training = training;
  m.total = static_cast<int>(trajectories.size());
  for (const auto& t : trajectories) {
    ++m.counts_by_source[std::string(to_string(t.source))];
    ++m.counts_by_difficulty[std::string(env::to_string(t.instruction.difficulty))];
  }
  const std::string shard = shard_bytes(trajectories);
  m.content_hash = sha256_hex(shard);

  const fs::path tmp = root_ / (".tmp-v" + std::to_string(version) + "-" + std::to_string(::getpid()));
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp);
  write_file(tmp / kShardFile, shard);
  write_file(tmp / kManifestFile, json(m).dump(2) + "\n");
  fs::remove_all(final_dir, ec);  // unsealed leftovers only; sealed dirs were rejected above
  fs::rename(tmp, final_dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot seal " + final_dir.string() + ": " + ec.message());

  DatasetVersion v;
  v.version = version;
  v.manifest = std::move(m);
  v.storage_path = final_dir;
  v.trajectories = std::move(trajectories);
  return v;
}

DatasetVersion DatasetStore::create(std::span<const Trajectory> trajectories, const TrainingMetadata& training) {
  for (const auto& t : trajectories) t.validate();
  const auto latest = latest_version();
  const int version = latest ? *latest + 1 : 0;
  return seal(version, std::nullopt, dedup({trajectories.begin(), trajectories.end()}), training);
}

DatasetVersion DatasetStore::merge(const DatasetVersion& base, std::span<const Trajectory> additions) {
  for (const auto& t : additions) {
    if (t.final_reward != 1) {
      throw Error(ErrorKind::gating, "merge rejected trajectory " + t.trajectory_id + " with final_reward " +
                                         std::to_string(t.final_reward));
    }
    t.validate();
  }
  std::vector<Trajectory> all = base.trajectories;
  all.insert(all.end(), additions.begin(), additions.end());
  return seal(base.version + 1, base.version, dedup(std::move(all)), base.manifest.training);
}

DatasetVersion DatasetStore::open(int version) const {
  const fs::path dir = version_dir(root_, version);
  if (!fs::exists(dir / kManifestFile)) {
    throw Error(ErrorKind::io, "dataset version " + std::to_string(version) + " not found under " + root_.string());
  }
  DatasetVersion v;
  v.version = version;
  v.storage_path = dir;
  try {
    v.manifest = json::parse(read_file(dir / kManifestFile)).get<DatasetManifest>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, (dir / kManifestFile).string() + ": " + e.what());
  }
  v.trajectories = read_jsonl(dir / kShardFile);
  if (static_cast<int>(v.trajectories.size()) != v.manifest.total) {
    throw Error(ErrorKind::validation, "manifest total " + std::to_string(v.manifest.total) +
                                           " does not match shard size " + std::to_string(v.trajectories.size()));
  }
  return v;
}

std::optional<int> DatasetStore::latest_version() const {
  std::optional<int> best;
  if (!fs::exists(root_)) return best;
  for (const auto& entry : fs::directory_iterator(root_)) {
    const std::string name = entry.path().filename().string();
    if (name.size() < 2 || name[0] != 'v') continue;
    if (name.find_first_not_of("0123456789", 1) != std::string::npos) continue;
    if (!fs::exists(entry.path() / kManifestFile)) continue;
    const int k = std::stoi(name.substr(1));
    if (!best || k > *best) best = k;
  }
  return best;
}

DatasetVersion DatasetStore::latest() const {
  const auto k = latest_version();
  if (!k) throw Error(ErrorKind::io, "dataset store " + root_.string() + " is empty");
  return open(*k);
}

}  // namespace plansmith
