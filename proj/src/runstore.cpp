#include "portcast/runstore.hpp"

#include <fstream>
#include <sstream>

namespace portcast::run {

std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot hash missing file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return fnv1a_hex(ss.str());
}

RunStore::RunStore(std::string out_dir) : root_(std::move(out_dir)) {
    fs::create_directories(root_ / "runs");
}

fs::path RunStore::create_run(const std::string& run_id) {
    if (run_id.empty() || run_id.find('/') != std::string::npos)
        throw ConfigError("run id must be a nonempty path-free name");
    fs::path dir = root_ / "runs" / run_id;
    if (fs::exists(dir))
        throw ConfigError("run id '" + run_id +
                          "' already exists; runs are immutable, pick a new --run-id");
    fs::create_directories(dir);
    return dir;
}

fs::path RunStore::run_dir(const std::string& run_id) const {
    fs::path dir = root_ / "runs" / run_id;
    if (!fs::exists(dir / "manifest.json"))
        throw UnknownRun("no completed run named '" + run_id + "' under " +
                         root_.string());
    return dir;
}

ManifestBuilder::ManifestBuilder(std::string run_id, std::string command,
                                 json config_snapshot, unsigned long long seed) {
    j_["run_id"] = std::move(run_id);
    j_["command"] = std::move(command);
    j_["config"] = std::move(config_snapshot);
    j_["seed"] = seed;
    j_["inputs"] = json::object();
    j_["artifacts"] = json::object();
    j_["checkpoints"] = json::object();
}

void ManifestBuilder::add_input(const std::string& name, const std::string& hash) {
    j_["inputs"][name] = hash;
}

void ManifestBuilder::add_artifact(const fs::path& run_dir, const std::string& rel_path) {
    j_["artifacts"][rel_path] = file_hash((run_dir / rel_path).string());
}

void ManifestBuilder::add_checkpoint_hash(const std::string& name,
                                          const std::string& hash) {
    j_["checkpoints"][name] = hash;
}

void ManifestBuilder::write(const fs::path& run_dir, double wall_clock_sec) {
    j_["wall_clock_sec"] = wall_clock_sec;
    write_text_file(run_dir / "manifest.json", j_.dump(1) + "\n");
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << content;
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw DataError("json parse failure in " + path.string() + ": " + e.what());
    }
    return j;
}

}  // namespace portcast::run
