#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "gml/error.hpp"
#include "gml/harness/csv.hpp"
#include "gml/io.hpp"

namespace gml::harness {

struct RatingRecord {
  std::string excerpt_id;
  std::string condition_id;
  std::string listener_id;
  double score = 0.0;
  bool operator==(const RatingRecord&) const = default;
};

struct ManifestEntry {
  std::string excerpt_id;
  std::string condition_id;
  std::string ref_path;  // as written; relative paths resolve against Manifest::base_dir
  std::string cod_path;
  std::vector<RatingRecord> ratings;

  /// Key used by evaluation files: "excerpt_id/condition_id".
  std::string key() const { return excerpt_id + "/" + condition_id; }
  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }
  std::size_t rating_count() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.ratings.size();
    return n;
  }
};

inline const std::vector<std::string> kManifestHeader = {"excerpt_id", "condition_id", "ref_path",
                                                         "cod_path",   "listener_id",  "score"};

/// One rating per row; rows of the same (excerpt, condition) must agree on paths.
inline Manifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir, bool check_files,
                               const std::string& name = "manifest") {
  Manifest m;
  m.base_dir = base_dir;
  std::map<std::pair<std::string, std::string>, std::size_t> entry_of;
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (const auto& row : expect_header(parse_csv(text, name), kManifestHeader, name)) {
    const std::string where = name + ":" + std::to_string(row.line);
    const auto& f = row.fields;
    for (std::size_t i = 0; i < f.size(); ++i)
      require(!f[i].empty(), Errc::parse_error, where + ": empty field '" + kManifestHeader[i] + "'");
    RatingRecord r{f[0], f[1], f[4], parse_double(f[5], where)};
    require(r.score >= 0.0 && r.score <= 100.0, Errc::out_of_range_score,
            where + ": score " + f[5] + " outside [0, 100]");
    require(seen.emplace(r.excerpt_id, r.condition_id, r.listener_id).second, Errc::duplicate_record,
            where + ": duplicate rating for (" + r.excerpt_id + ", " + r.condition_id + ", " + r.listener_id + ")");
    auto [it, fresh] = entry_of.emplace(std::make_pair(f[0], f[1]), m.entries.size());
    if (fresh) {
      m.entries.push_back({f[0], f[1], f[2], f[3], {}});
      if (check_files) {
        for (const auto* p : {&f[2], &f[3]})
          require(std::filesystem::exists(m.resolve(*p)), Errc::missing_file, where + ": no such file " + *p);
      }
    }
    ManifestEntry& e = m.entries[it->second];
    require(e.ref_path == f[2] && e.cod_path == f[3], Errc::parse_error,
            where + ": paths differ from earlier rows of the same condition");
    e.ratings.push_back(std::move(r));
  }
  return m;
}

inline Manifest load_manifest(const std::filesystem::path& path, bool check_files = true) {
  return parse_manifest(read_file(path), path.parent_path(), check_files, path.string());
}

inline std::string format_manifest(const Manifest& m) {
  std::string out;
  for (std::size_t i = 0; i < kManifestHeader.size(); ++i) out += (i ? "," : "") + kManifestHeader[i];
  out += "\n";
  for (const auto& e : m.entries)
    for (const auto& r : e.ratings)
      out += csv_field(e.excerpt_id) + "," + csv_field(e.condition_id) + "," + csv_field(e.ref_path) + "," +
             csv_field(e.cod_path) + "," + csv_field(r.listener_id) + "," + format_double(r.score) + "\n";
  return out;
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  write_file_atomic(path, format_manifest(m));
}

}  // namespace gml::harness
