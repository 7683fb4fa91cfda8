// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <autoscrum/cli.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace support
{

inline std::filesystem::path source_dir()
{
    return AUTOSCRUM_SOURCE_DIR;
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

inline autoscrum::Json read_json(const std::filesystem::path& path)
{
    return autoscrum::Json::parse(read_file(path));
}

/// A fresh directory removed on destruction.
class TempDir
{
  public:
    TempDir()
    {
        std::string tmpl = (std::filesystem::temp_directory_path() / "autoscrum-test-XXXXXX").string();
        if (!::mkdtemp(tmpl.data()))
            throw std::runtime_error("mkdtemp failed");
        _path = tmpl;
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(_path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return _path; }
    std::filesystem::path operator/(const std::string& name) const { return _path / name; }

  private:
    std::filesystem::path _path;
};

inline const autoscrum::ProgramLibrary& programs()
{
    static const autoscrum::ProgramLibrary lib(source_dir() / "programs");
    return lib;
}

inline autoscrum::ProjectState example(const std::string& name)
{
    return autoscrum::load_project(source_dir() / "examples" / (name + ".json"));
}

inline std::string fixture(const std::string& name)
{
    return (source_dir() / "fixtures" / (name + ".jsonl")).string();
}

/// Runs the CLI in-process; returns the exit code and captures both streams.
struct CliRun
{
    int code = -1;
    std::string out;
    std::string err;
};

inline CliRun run_cli(std::vector<std::string> args, const std::string& input = {})
{
    args.insert(args.begin(), "autoscrum");
    std::vector<const char*> argv;
    for (const auto& a: args)
        argv.push_back(a.c_str());
    std::istringstream in(input);
    std::ostringstream out, err;
    CliRun run;
    run.code = autoscrum::run_cli(static_cast<int>(argv.size()), argv.data(), {in, out, err, false, {}});
    run.out = out.str();
    run.err = err.str();
    return run;
}

} // namespace support
