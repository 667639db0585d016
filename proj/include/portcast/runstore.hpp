#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "portcast/errors.hpp"
#include "portcast/hashing.hpp"

namespace portcast::run {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Runs live under <out_dir>/runs/<run_id>. Creation is create-only: a run id
// can never be reused, so concurrent or repeated commands cannot clobber an
// existing run.
class RunStore {
  public:
    explicit RunStore(std::string out_dir);

    fs::path create_run(const std::string& run_id);
    fs::path run_dir(const std::string& run_id) const;  // throws UnknownRun
    fs::path root() const { return root_; }

  private:
    fs::path root_;
};

// Accumulates the provenance of one command and writes manifest.json last.
class ManifestBuilder {
  public:
    ManifestBuilder(std::string run_id, std::string command, json config_snapshot,
                    unsigned long long seed);

    void add_input(const std::string& name, const std::string& hash);
    // path relative to the run dir; hashes the file content
    void add_artifact(const fs::path& run_dir, const std::string& rel_path);
    void add_checkpoint_hash(const std::string& name, const std::string& hash);
    void write(const fs::path& run_dir, double wall_clock_sec);

  private:
    json j_;
};

void write_text_file(const fs::path& path, const std::string& content);
std::string read_text_file(const fs::path& path);
json read_json_file(const fs::path& path);

}  // namespace portcast::run
