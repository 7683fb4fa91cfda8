// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <autoscrum/template/program.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>

#ifndef AUTOSCRUM_DEFAULT_PROGRAMS_DIR
#define AUTOSCRUM_DEFAULT_PROGRAMS_DIR "programs"
#endif

namespace autoscrum
{

/// Picks the program directory: explicit flag, then $AUTOSCRUM_PROGRAMS, then
/// ./programs, then the directory the sources were built from.
inline std::filesystem::path resolve_programs_dir(const std::string& flag = {})
{
    if (!flag.empty())
        return flag;
    if (const char* env = std::getenv("AUTOSCRUM_PROGRAMS"); env && *env)
        return env;
    std::error_code ec;
    if (std::filesystem::is_directory("programs", ec))
        return "programs";
    return AUTOSCRUM_DEFAULT_PROGRAMS_DIR;
}

/// Loads and caches parsed `.hbs` programs from one directory.
class ProgramLibrary
{
  public:
    explicit ProgramLibrary(std::filesystem::path dir): _dir(std::move(dir)) {}

    [[nodiscard]] const std::filesystem::path& dir() const noexcept { return _dir; }

    /// `name` without extension, e.g. "requalizer".
    std::shared_ptr<const tmpl::Program> get(const std::string& name) const
    {
        std::lock_guard lock(_mutex);
        if (auto it = _cache.find(name); it != _cache.end())
            return it->second;
        auto path = _dir / (name + ".hbs");
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw IoError(path.string(), "program file not found");
        std::stringstream buf;
        buf << in.rdbuf();
        std::shared_ptr<const tmpl::Program> program;
        try
        {
            program = std::make_shared<const tmpl::Program>(tmpl::parse(buf.str()));
        }
        catch (const SyntaxError& e)
        {
            throw SyntaxError(path.string() + ": " + e.reason(), e.line(), e.column());
        }
        _cache.emplace(name, program);
        return program;
    }

  private:
    std::filesystem::path _dir;
    mutable std::mutex _mutex;
    mutable std::map<std::string, std::shared_ptr<const tmpl::Program>> _cache;
};

} // namespace autoscrum
