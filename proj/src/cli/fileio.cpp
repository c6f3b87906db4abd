#include "nscomp/cli/fileio.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nscomp/error.hpp"

namespace nscomp {

namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

OutputSet::OutputSet(std::string dir) : dir_(std::move(dir)) {}

OutputSet::~OutputSet() {
  if (committed_) return;
  for (const std::string& p : written_) {
    std::error_code ec;
    fs::remove(p, ec);
  }
}

std::string OutputSet::path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

void OutputSet::write(const std::string& name, const std::string& contents) {
  const std::string p = path(name);
  write_file_atomic(p, contents);
  written_.push_back(p);
}

}  // namespace nscomp
