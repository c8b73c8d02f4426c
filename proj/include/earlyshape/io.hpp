#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "earlyshape/error.hpp"

namespace earlyshape {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Collects output files in temporaries next to their targets and renames
/// them all on commit(). Destroying an uncommitted batch removes the
/// temporaries, so a failed command leaves no partial outputs behind.
class StagedOutputs {
 public:
  StagedOutputs() = default;
  StagedOutputs(const StagedOutputs&) = delete;
  StagedOutputs& operator=(const StagedOutputs&) = delete;
  ~StagedOutputs() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& [tmp, _] : files_) std::filesystem::remove(tmp, ec);
  }

  /// Writes `contents` to a temporary beside `target`. Returns the byte count.
  std::size_t stage(const std::filesystem::path& target, const std::string& contents) {
    std::error_code ec;
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + target.parent_path().string() + ": " + ec.message());
    auto tmp = target;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot write " + tmp.string());
      out << contents;
      out.flush();
      if (!out) throw IoError("write failed for " + tmp.string());
    }
    files_.emplace_back(std::move(tmp), target);
    return contents.size();
  }

  void commit() {
    for (const auto& [tmp, target] : files_) {
      std::error_code ec;
      std::filesystem::rename(tmp, target, ec);
      if (ec) throw IoError("cannot move " + tmp.string() + " to " + target.string() + ": " + ec.message());
    }
    committed_ = true;
  }

 private:
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> files_;
  bool committed_ = false;
};

inline void write_file_atomic(const std::filesystem::path& target, const std::string& contents) {
  StagedOutputs out;
  out.stage(target, contents);
  out.commit();
}

}  // namespace earlyshape
