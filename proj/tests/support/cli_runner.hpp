#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace conftree::testing {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream(path, std::ios::binary) << text;
}

// Runs the CLI binary with `args` (already shell-quoted) inside `workdir`.
inline CliResult run_cli(const std::filesystem::path& cli, const std::filesystem::path& workdir,
                         const std::string& args) {
    std::filesystem::create_directories(workdir);
    const auto out = workdir / ".stdout";
    const auto err = workdir / ".stderr";
    const std::string cmd = "cd '" + workdir.string() + "' && '" + cli.string() + "' " + args + " > '" +
                            out.string() + "' 2> '" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

// True when both directories hold the same relative file names with
// identical bytes, ignoring log files.
inline bool same_outputs(const std::filesystem::path& a, const std::filesystem::path& b) {
    namespace fs = std::filesystem;
    auto collect = [](const fs::path& root) {
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(root))
            if (e.is_regular_file() && e.path().extension() != ".log" && e.path().filename().string()[0] != '.')
                files.push_back(fs::relative(e.path(), root));
        std::sort(files.begin(), files.end());
        return files;
    };
    const auto fa = collect(a);
    if (fa != collect(b) || fa.empty()) return false;
    for (const auto& f : fa)
        if (slurp(a / f) != slurp(b / f)) return false;
    return true;
}

}  // namespace conftree::testing
