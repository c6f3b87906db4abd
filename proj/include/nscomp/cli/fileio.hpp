#pragma once

#include <string>
#include <vector>

namespace nscomp {

// Throws UsageError when the file cannot be opened.
std::string read_file(const std::string& path);

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::string& path, const std::string& contents);

// Files written during one command. Unless commit() is called, the
// destructor removes them so a failed run leaves no partial outputs.
class OutputSet {
 public:
  explicit OutputSet(std::string dir);
  ~OutputSet();
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;

  // Full path of `name` inside the output directory.
  std::string path(const std::string& name) const;
  void write(const std::string& name, const std::string& contents);
  void commit() { committed_ = true; }
  const std::vector<std::string>& written() const { return written_; }

 private:
  std::string dir_;
  std::vector<std::string> written_;
  bool committed_ = false;
};

}  // namespace nscomp
