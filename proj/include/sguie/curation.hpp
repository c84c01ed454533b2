#pragma once

// Reference curation by volunteer voting: sessions of raw images with
// candidate enhancements, blinded ballots, an append-only JSON-lines vote
// ledger, tallies and reference selection.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/imgproc.hpp>

#include "sguie/dataset.hpp"
#include "sguie/errors.hpp"
#include "sguie/image.hpp"

namespace sguie {

/// Rejected curation request. `kind` maps onto HTTP 400 / 404 / 409.
class CurationError : public std::runtime_error {
 public:
  enum class Kind { Malformed, NotFound, Closed };
  CurationError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }
  int http_status() const { return kind_ == Kind::Malformed ? 400 : kind_ == Kind::NotFound ? 404 : 409; }

 private:
  Kind kind_;
};

struct SessionImage {
  std::string id;
  std::filesystem::path raw;
  std::map<std::string, std::filesystem::path> candidates;  // method -> file
};

struct CurationSession {
  std::string id;
  std::uint64_t seed = 0;
  std::vector<std::string> volunteers;
  std::vector<SessionImage> images;  // sorted by id

  const SessionImage* find_image(const std::string& image) const {
    auto it = std::lower_bound(images.begin(), images.end(), image,
                               [](const SessionImage& a, const std::string& b) { return a.id < b; });
    return it != images.end() && it->id == image ? &*it : nullptr;
  }
  bool has_volunteer(const std::string& v) const {
    return std::find(volunteers.begin(), volunteers.end(), v) != volunteers.end();
  }
  std::size_t ballot_count() const { return images.size() * volunteers.size(); }

  /// All methods appearing in any image, sorted.
  std::vector<std::string> methods() const {
    std::set<std::string> s;
    for (const auto& im : images) {
      for (const auto& [m, p] : im.candidates) s.insert(m);
    }
    return {s.begin(), s.end()};
  }

  void validate() const {
    if (volunteers.empty()) throw UsageError("curation session has no volunteers");
    std::set<std::string> seen;
    for (const auto& v : volunteers) {
      if (v.empty()) throw UsageError("empty volunteer id");
      if (!seen.insert(v).second) throw UsageError("duplicate volunteer '" + v + "'");
    }
    for (std::size_t i = 0; i < images.size(); ++i) {
      if (i > 0 && !(images[i - 1].id < images[i].id)) throw UsageError("session images must be unique and sorted");
      if (images[i].candidates.size() < 2) {
        throw UsageError("image '" + images[i].id + "' has fewer than 2 candidates");
      }
    }
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["id"] = id;
    j["seed"] = seed;
    j["volunteers"] = volunteers;
    j["images"] = nlohmann::ordered_json::array();
    for (const auto& im : images) {
      nlohmann::ordered_json c = nlohmann::ordered_json::object();
      for (const auto& [m, p] : im.candidates) c[m] = p.string();
      j["images"].push_back({{"id", im.id}, {"raw", im.raw.string()}, {"candidates", c}});
    }
    return j;
  }

  static CurationSession from_json(const nlohmann::json& j) {
    CurationSession s;
    try {
      s.id = j.at("id").get<std::string>();
      s.seed = j.at("seed").get<std::uint64_t>();
      s.volunteers = j.at("volunteers").get<std::vector<std::string>>();
      for (const auto& im : j.at("images")) {
        SessionImage e;
        e.id = im.at("id").get<std::string>();
        e.raw = im.at("raw").get<std::string>();
        for (const auto& [m, p] : im.at("candidates").items()) e.candidates[m] = p.get<std::string>();
        s.images.push_back(std::move(e));
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("session file: ") + e.what());
    }
    std::sort(s.images.begin(), s.images.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    s.validate();
    return s;
  }
};

inline void save_session(const std::filesystem::path& path, const CurationSession& s) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << s.to_json().dump(2) << '\n';
}

inline CurationSession load_session(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open session " + path.string());
  try {
    return CurationSession::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("session " + path.string() + ": " + e.what());
  }
}

struct ExcludedImage {
  std::string id;
  std::vector<std::string> missing_methods;
};

struct SessionBuild {
  CurationSession session;
  std::vector<ExcludedImage> excluded;
};

/// One session image per raw file whose id has a file in every candidate
/// directory; the rest are reported in `excluded`.
inline SessionBuild build_session(const std::filesystem::path& raw_dir,
                                  const std::map<std::string, std::filesystem::path>& candidate_dirs,
                                  const std::vector<std::string>& volunteers, std::uint64_t seed,
                                  std::string session_id = "") {
  if (candidate_dirs.size() < 2) throw UsageError("build_session: need at least 2 candidate methods");
  if (!std::filesystem::is_directory(raw_dir)) throw FormatError("raw directory " + raw_dir.string() + " not found");
  std::map<std::string, std::map<std::string, std::filesystem::path>> indexed;
  for (const auto& [method, dir] : candidate_dirs) {
    if (method.empty()) throw UsageError("build_session: empty method name");
    if (!std::filesystem::is_directory(dir)) throw FormatError("candidate directory " + dir.string() + " not found");
    indexed[method] = detail::index_dir(dir);
  }
  SessionBuild out;
  out.session.id = session_id.empty() ? "session-" + std::to_string(seed) : std::move(session_id);
  out.session.seed = seed;
  out.session.volunteers = volunteers;
  for (const auto& [id, raw] : detail::index_dir(raw_dir)) {
    SessionImage im{id, raw, {}};
    ExcludedImage ex{id, {}};
    for (const auto& [method, files] : indexed) {
      auto it = files.find(id);
      if (it == files.end()) ex.missing_methods.push_back(method);
      else im.candidates[method] = it->second;
    }
    if (ex.missing_methods.empty()) out.session.images.push_back(std::move(im));
    else out.excluded.push_back(std::move(ex));
  }
  out.session.validate();
  return out;
}

namespace detail {

inline std::uint64_t fnv1a(std::uint64_t h, const std::string& s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return (h ^ 0xff) * 0x100000001b3ULL;
}

inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << ms << 'Z';
  return os.str();
}

}  // namespace detail

struct BallotCandidate {
  std::string label;
  std::string method;  // server side only
};

/// Candidates of `image` in the display order for `volunteer`, each with an
/// opaque label. Pure function of (seed, volunteer, image, methods).
inline std::vector<BallotCandidate> ballot_candidates(const CurationSession& s, const std::string& volunteer,
                                                      const SessionImage& image) {
  const std::uint64_t key = detail::fnv1a(detail::fnv1a(0xcbf29ce484222325ULL ^ s.seed, volunteer), image.id);
  std::vector<BallotCandidate> out;
  std::set<std::string> used;
  for (const auto& [method, path] : image.candidates) {
    std::uint64_t h = detail::fnv1a(key, method);
    std::string label;
    do {
      std::ostringstream os;
      h = detail::splitmix(h);
      os << 'c' << std::hex << std::setw(8) << std::setfill('0') << (h & 0xffffffffULL);
      label = os.str();
    } while (!used.insert(label).second);
    out.push_back({label, method});
  }
  std::mt19937_64 rng(detail::splitmix(key));
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

// ---------------------------------------------------------------------------
// Ledger

struct LedgerEvent {
  enum class Type { Vote, Score, Close };
  Type type = Type::Vote;
  std::uint64_t seq = 0;
  std::string timestamp;
  std::string volunteer;
  std::string image;
  std::string method;
  int score = 0;                 // Score events, 1..5
  std::optional<std::string> replaces;  // Vote events that superseded an earlier vote

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["seq"] = seq;
    j["ts"] = timestamp;
    j["type"] = type == Type::Vote ? "vote" : type == Type::Score ? "score" : "close";
    if (type != Type::Close) {
      j["volunteer"] = volunteer;
      j["image"] = image;
      j["method"] = method;
    }
    if (type == Type::Score) j["score"] = score;
    if (replaces) j["replaces"] = *replaces;
    return j;
  }

  static LedgerEvent from_json(const nlohmann::json& j) {
    LedgerEvent e;
    const std::string type = j.at("type").get<std::string>();
    if (type == "vote") e.type = Type::Vote;
    else if (type == "score") e.type = Type::Score;
    else if (type == "close") e.type = Type::Close;
    else throw FormatError("unknown ledger event type '" + type + "'");
    e.seq = j.at("seq").get<std::uint64_t>();
    e.timestamp = j.value("ts", std::string());
    if (e.type != Type::Close) {
      e.volunteer = j.at("volunteer").get<std::string>();
      e.image = j.at("image").get<std::string>();
      e.method = j.at("method").get<std::string>();
    }
    if (e.type == Type::Score) {
      e.score = j.at("score").get<int>();
      if (e.score < 1 || e.score > 5) throw FormatError("ledger score out of range");
    }
    if (j.contains("replaces")) e.replaces = j.at("replaces").get<std::string>();
    return e;
  }
};

/// Parses a JSON-lines ledger. A missing file is an empty ledger.
inline std::vector<LedgerEvent> read_ledger(const std::filesystem::path& path) {
  std::vector<LedgerEvent> events;
  if (!std::filesystem::exists(path)) return events;
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open ledger " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      events.push_back(LedgerEvent::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("ledger " + path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError("ledger " + path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return events;
}

/// Effective state after replaying events: last vote per (volunteer, image),
/// last score per (volunteer, image, method).
struct LedgerState {
  std::map<std::pair<std::string, std::string>, std::string> votes;
  std::map<std::tuple<std::string, std::string, std::string>, int> scores;
  bool closed = false;

  void apply(const LedgerEvent& e) {
    switch (e.type) {
      case LedgerEvent::Type::Vote: votes[{e.volunteer, e.image}] = e.method; break;
      case LedgerEvent::Type::Score: scores[{e.volunteer, e.image, e.method}] = e.score; break;
      case LedgerEvent::Type::Close: closed = true; break;
    }
  }

  static LedgerState replay(const std::vector<LedgerEvent>& events) {
    LedgerState s;
    for (const auto& e : events) s.apply(e);
    return s;
  }
};

// ---------------------------------------------------------------------------
// Tally

struct ImageTally {
  std::string id;
  std::map<std::string, int> counts;  // every candidate method, zeros included
  int votes = 0;
  std::string winner;  // empty when nobody voted
  bool tie = false;
};

struct TallyResult {
  std::vector<ImageTally> images;  // images with at least one vote
  std::vector<std::string> no_votes;
  int total_votes = 0;
  std::map<std::string, double> vote_share;       // percent of all effective votes
  std::map<std::string, double> reference_share;  // percent of selected references
  std::map<std::string, double> mean_ps;
  std::map<std::string, int> ps_count;
  std::size_t ignored = 0;  // ledger entries not matching the session

  bool empty() const { return total_votes == 0 && mean_ps.empty(); }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    if (empty()) return j;
    j["total_votes"] = total_votes;
    j["images"] = nlohmann::ordered_json::array();
    std::vector<std::string> ties;
    for (const auto& im : images) {
      j["images"].push_back(
          {{"id", im.id}, {"votes", im.votes}, {"counts", im.counts}, {"winner", im.winner}, {"tie", im.tie}});
      if (im.tie) ties.push_back(im.id);
    }
    j["ties"] = ties;
    j["no_votes"] = no_votes;
    j["vote_share"] = vote_share;
    j["reference_share"] = reference_share;
    j["mean_ps"] = mean_ps;
    j["ps_count"] = ps_count;
    j["ignored"] = ignored;
    return j;
  }

  /// One row per (image, method) plus the global shares.
  std::string csv() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "image,method,votes,winner,tie\n";
    for (const auto& im : images) {
      for (const auto& [m, c] : im.counts) {
        os << im.id << ',' << m << ',' << c << ',' << (m == im.winner ? 1 : 0) << ',' << (im.tie ? 1 : 0) << '\n';
      }
    }
    os << "\nmethod,vote_share,reference_share,mean_ps\n";
    for (const auto& [m, v] : vote_share) {
      os << m << ',' << v << ',' << reference_share.at(m) << ',';
      if (auto it = mean_ps.find(m); it != mean_ps.end()) os << it->second;
      os << '\n';
    }
    return os.str();
  }
};

/// Pure function of the session and the ledger events.
inline TallyResult tally(const CurationSession& session, const std::vector<LedgerEvent>& events) {
  const LedgerState st = LedgerState::replay(events);
  TallyResult r;
  const auto methods = session.methods();
  std::map<std::string, int> global, winners;
  for (const auto& m : methods) global[m] = winners[m] = 0;

  std::map<std::string, std::map<std::string, int>> per_image;
  for (const auto& [key, method] : st.votes) {
    const SessionImage* im = session.find_image(key.second);
    if (!im || !session.has_volunteer(key.first) || !im->candidates.count(method)) {
      ++r.ignored;
      continue;
    }
    ++per_image[im->id][method];
  }
  for (const auto& im : session.images) {
    ImageTally t;
    t.id = im.id;
    for (const auto& [m, p] : im.candidates) t.counts[m] = 0;
    if (auto it = per_image.find(im.id); it != per_image.end()) {
      for (const auto& [m, c] : it->second) t.counts[m] = c;
    }
    int best = 0, at_best = 0;
    for (const auto& [m, c] : t.counts) {
      t.votes += c;
      global[m] += c;
      if (c > best) {
        best = c;
        at_best = 1;
        t.winner = m;  // map order: the first maximum is the lexicographically smallest
      } else if (c == best && c > 0) {
        ++at_best;
      }
    }
    if (t.votes == 0) {
      r.no_votes.push_back(im.id);
      continue;
    }
    t.tie = at_best > 1;
    ++winners[t.winner];
    r.total_votes += t.votes;
    r.images.push_back(std::move(t));
  }
  if (r.total_votes > 0) {
    const double nv = r.total_votes, ni = static_cast<double>(r.images.size());
    for (const auto& m : methods) {
      r.vote_share[m] = 100.0 * global[m] / nv;
      r.reference_share[m] = 100.0 * winners[m] / ni;
    }
  }

  std::map<std::string, std::pair<long, int>> ps;
  for (const auto& [key, score] : st.scores) {
    const auto& [vol, image, method] = key;
    const SessionImage* im = session.find_image(image);
    if (!im || !session.has_volunteer(vol) || !im->candidates.count(method)) {
      ++r.ignored;
      continue;
    }
    ps[method].first += score;
    ++ps[method].second;
  }
  for (const auto& [m, sc] : ps) {
    r.mean_ps[m] = static_cast<double>(sc.first) / sc.second;
    r.ps_count[m] = sc.second;
  }
  return r;
}

/// Writes each winner as <out_dir>/<image id>.png. Returns the ids written.
inline std::vector<std::string> select_references(const CurationSession& session, const TallyResult& t,
                                                  const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;
  for (const auto& im : t.images) {
    const SessionImage* s = session.find_image(im.id);
    if (!s) continue;
    const auto& src = s->candidates.at(im.winner);
    const auto dst = out_dir / (im.id + ".png");
    std::string ext = src.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png") std::filesystem::copy_file(src, dst, std::filesystem::copy_options::overwrite_existing);
    else write_image(dst, read_image(src));
    written.push_back(im.id);
  }
  return written;
}

// ---------------------------------------------------------------------------
// Live store: validation plus serialized ledger appends.

class CurationStore {
 public:
  CurationStore(CurationSession session, std::filesystem::path ledger_path)
      : session_(std::move(session)), ledger_path_(std::move(ledger_path)) {
    session_.validate();
    events_ = read_ledger(ledger_path_);
    state_ = LedgerState::replay(events_);
    if (!ledger_path_.parent_path().empty()) std::filesystem::create_directories(ledger_path_.parent_path());
    ledger_.open(ledger_path_, std::ios::app);
    if (!ledger_) throw FormatError("cannot append to ledger " + ledger_path_.string());
  }

  const CurationSession& session() const { return session_; }
  const std::filesystem::path& ledger_path() const { return ledger_path_; }

  std::size_t ledger_size() const {
    std::lock_guard lock(mu_);
    return events_.size();
  }
  bool closed() const {
    std::lock_guard lock(mu_);
    return state_.closed;
  }

  nlohmann::ordered_json session_json() const {
    std::lock_guard lock(mu_);
    nlohmann::ordered_json j;
    j["id"] = session_.id;
    j["volunteers"] = session_.volunteers;
    j["images"] = nlohmann::ordered_json::array();
    for (const auto& im : session_.images) j["images"].push_back({{"id", im.id}, {"candidates", im.candidates.size()}});
    j["ballots"] = session_.ballot_count();
    j["votes"] = state_.votes.size();
    j["closed"] = state_.closed;
    return j;
  }

  /// Next image `volunteer` has not voted on, with blinded candidates.
  nlohmann::ordered_json ballot(const std::string& volunteer) const {
    std::lock_guard lock(mu_);
    require_volunteer(volunteer);
    if (state_.closed) throw CurationError(CurationError::Kind::Closed, "session is closed");
    std::size_t done = 0;
    const SessionImage* next = nullptr;
    for (const auto& im : session_.images) {
      if (state_.votes.count({volunteer, im.id})) ++done;
      else if (!next) next = &im;
    }
    nlohmann::ordered_json j;
    j["volunteer"] = volunteer;
    j["progress"] = {{"done", done}, {"total", session_.images.size()}};
    j["done"] = next == nullptr;
    if (next) {
      j["image"] = next->id;
      j["raw_url"] = "/image/" + next->id + "/raw";
      j["candidates"] = nlohmann::ordered_json::array();
      for (const auto& c : ballot_candidates(session_, volunteer, *next)) {
        j["candidates"].push_back({{"label", c.label}, {"url", "/image/" + next->id + "/" + c.label + "?volunteer=" + volunteer}});
      }
    }
    return j;
  }

  /// Best-vote by method name. Returns the event appended.
  LedgerEvent record_vote(const std::string& volunteer, const std::string& image, const std::string& method) {
    std::lock_guard lock(mu_);
    check_open_target(volunteer, image, method);
    LedgerEvent e;
    e.type = LedgerEvent::Type::Vote;
    e.volunteer = volunteer;
    e.image = image;
    e.method = method;
    if (auto it = state_.votes.find({volunteer, image}); it != state_.votes.end()) e.replaces = it->second;
    append(e);
    return e;
  }

  LedgerEvent record_score(const std::string& volunteer, const std::string& image, const std::string& method, int score) {
    std::lock_guard lock(mu_);
    if (score < 1 || score > 5) throw CurationError(CurationError::Kind::Malformed, "score must be an integer 1..5");
    check_open_target(volunteer, image, method);
    LedgerEvent e;
    e.type = LedgerEvent::Type::Score;
    e.volunteer = volunteer;
    e.image = image;
    e.method = method;
    e.score = score;
    append(e);
    return e;
  }

  /// Maps a ballot label back to its method; unknown labels are Malformed.
  std::string resolve_label(const std::string& volunteer, const std::string& image, const std::string& label) const {
    require_volunteer(volunteer);
    const SessionImage& im = require_image(image);
    for (const auto& c : ballot_candidates(session_, volunteer, im)) {
      if (c.label == label) return c.method;
    }
    throw CurationError(CurationError::Kind::Malformed, "label '" + label + "' is not on the ballot for this image");
  }

  /// File behind /image/{id}/{which}: "raw", a ballot label (needs the
  /// volunteer), or a method name once the session is closed.
  std::filesystem::path image_file(const std::string& image, const std::string& which,
                                   const std::string& volunteer) const {
    std::lock_guard lock(mu_);
    const SessionImage& im = require_image(image);
    if (which == "raw") return im.raw;
    if (state_.closed) {
      if (auto it = im.candidates.find(which); it != im.candidates.end()) return it->second;
    }
    if (volunteer.empty() || !session_.has_volunteer(volunteer)) {
      throw CurationError(CurationError::Kind::NotFound, "unknown candidate '" + which + "'");
    }
    for (const auto& c : ballot_candidates(session_, volunteer, im)) {
      if (c.label == which) return im.candidates.at(c.method);
    }
    throw CurationError(CurationError::Kind::NotFound, "unknown candidate '" + which + "'");
  }

  TallyResult current_tally() const {
    std::lock_guard lock(mu_);
    return tally(session_, events_);
  }

  void close() {
    std::lock_guard lock(mu_);
    if (state_.closed) return;
    LedgerEvent e;
    e.type = LedgerEvent::Type::Close;
    append(e);
  }

 private:
  void require_volunteer(const std::string& v) const {
    if (v.empty()) throw CurationError(CurationError::Kind::Malformed, "missing volunteer");
    if (!session_.has_volunteer(v)) throw CurationError(CurationError::Kind::NotFound, "unknown volunteer '" + v + "'");
  }
  const SessionImage& require_image(const std::string& id) const {
    const SessionImage* im = session_.find_image(id);
    if (!im) throw CurationError(CurationError::Kind::NotFound, "unknown image '" + id + "'");
    return *im;
  }
  void check_open_target(const std::string& volunteer, const std::string& image, const std::string& method) const {
    require_volunteer(volunteer);
    const SessionImage& im = require_image(image);
    if (!im.candidates.count(method)) {
      throw CurationError(CurationError::Kind::NotFound, "unknown method '" + method + "' for image '" + image + "'");
    }
    if (state_.closed) throw CurationError(CurationError::Kind::Closed, "session is closed");
  }
  void append(LedgerEvent& e) {
    e.seq = events_.empty() ? 0 : events_.back().seq + 1;
    e.timestamp = detail::utc_timestamp();
    ledger_ << e.to_json().dump() << '\n';
    ledger_.flush();
    if (!ledger_) throw FormatError("ledger write failed: " + ledger_path_.string());
    state_.apply(e);
    events_.push_back(e);
  }

  CurationSession session_;
  std::filesystem::path ledger_path_;
  std::ofstream ledger_;
  std::vector<LedgerEvent> events_;
  LedgerState state_;
  mutable std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Built-in candidate generators

struct CandidateMethod {
  enum class Kind { Identity, GrayWorld, Gamma, HistEq };
  Kind kind = Kind::Identity;
  double gamma = 1.0;

  /// Directory name: identity, gray_world, hist_eq, gamma_<g>.
  std::string name() const {
    switch (kind) {
      case Kind::Identity: return "identity";
      case Kind::GrayWorld: return "gray_world";
      case Kind::HistEq: return "hist_eq";
      case Kind::Gamma: {
        std::ostringstream os;
        os << "gamma_" << gamma;
        return os.str();
      }
    }
    return "";
  }

  /// Accepts identity, gray_world, hist_eq, gamma(<g>), gamma:<g>, gamma_<g>.
  static CandidateMethod parse(const std::string& s) {
    if (s == "identity") return {Kind::Identity};
    if (s == "gray_world") return {Kind::GrayWorld};
    if (s == "hist_eq") return {Kind::HistEq};
    if (s.rfind("gamma", 0) == 0 && s.size() > 6) {
      std::string num = s.substr(6);
      if (s[5] == '(') {
        if (num.empty() || num.back() != ')') throw UsageError("bad candidate method '" + s + "'");
        num.pop_back();
      } else if (s[5] != ':' && s[5] != '_') {
        throw UsageError("bad candidate method '" + s + "'");
      }
      std::size_t used = 0;
      double g = 0;
      try {
        g = std::stod(num, &used);
      } catch (const std::exception&) {
        throw UsageError("bad gamma in '" + s + "'");
      }
      if (used != num.size() || !(g > 0) || !std::isfinite(g)) throw UsageError("bad gamma in '" + s + "'");
      return {Kind::Gamma, g};
    }
    throw UsageError("unknown candidate method '" + s + "' (identity, gray_world, gamma(g), hist_eq)");
  }
};

inline Rgb8Image apply_candidate(const Rgb8Image& img, const CandidateMethod& m) {
  Rgb8Image out = img;
  const std::size_t n = img.height * img.width;
  switch (m.kind) {
    case CandidateMethod::Kind::Identity: break;
    case CandidateMethod::Kind::GrayWorld: {
      double mean[3] = {0, 0, 0};
      for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) mean[c] += img.pixels[3 * i + c];
      }
      for (double& v : mean) v /= static_cast<double>(std::max<std::size_t>(n, 1));
      const double target = (mean[0] + mean[1] + mean[2]) / 3.0;
      for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) {
          const double s = mean[c] > 0 ? target / mean[c] : 1.0;
          out.pixels[3 * i + c] = static_cast<std::uint8_t>(std::clamp(std::lround(img.pixels[3 * i + c] * s), 0L, 255L));
        }
      }
      break;
    }
    case CandidateMethod::Kind::Gamma: {
      std::uint8_t lut[256];
      for (int v = 0; v < 256; ++v) {
        lut[v] = static_cast<std::uint8_t>(std::clamp(std::lround(255.0 * std::pow(v / 255.0, m.gamma)), 0L, 255L));
      }
      for (auto& v : out.pixels) v = lut[v];
      break;
    }
    case CandidateMethod::Kind::HistEq: {
      cv::Mat ycc;
      cv::cvtColor(detail::as_mat(img), ycc, cv::COLOR_RGB2YCrCb);
      std::vector<cv::Mat> planes;
      cv::split(ycc, planes);
      cv::equalizeHist(planes[0], planes[0]);
      cv::merge(planes, ycc);
      cv::Mat rgb;
      cv::cvtColor(ycc, rgb, cv::COLOR_YCrCb2RGB);
      out = detail::from_mat(rgb);
      break;
    }
  }
  return out;
}

struct GenReport {
  std::map<std::string, std::filesystem::path> dirs;  // method name -> output directory
  std::size_t written = 0;
  std::vector<std::string> failures;  // "<file>: <reason>"
};

/// Writes <out_root>/<method name>/<id>.png for every decodable raw image.
inline GenReport gen_candidates(const std::filesystem::path& raw_dir, const std::vector<CandidateMethod>& methods,
                                const std::filesystem::path& out_root) {
  if (methods.empty()) throw UsageError("gen_candidates: no methods given");
  if (!std::filesystem::is_directory(raw_dir)) throw FormatError("raw directory " + raw_dir.string() + " not found");
  GenReport rep;
  for (const auto& m : methods) {
    rep.dirs[m.name()] = out_root / m.name();
    std::filesystem::create_directories(rep.dirs[m.name()]);
  }
  for (const auto& [id, path] : detail::index_dir(raw_dir)) {
    Rgb8Image img;
    try {
      img = read_image(path);
    } catch (const std::exception& e) {
      rep.failures.push_back(path.filename().string() + ": " + e.what());
      continue;
    }
    for (const auto& m : methods) {
      write_image(rep.dirs[m.name()] / (id + ".png"), apply_candidate(img, m));
      ++rep.written;
    }
  }
  return rep;
}

}  // namespace sguie
