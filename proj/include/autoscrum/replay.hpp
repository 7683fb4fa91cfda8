// SPDX-License-Identifier: Apache-2.0
#pragma once

// Deterministic completion sources backed by newline-delimited JSON fixture
// files, and a recording wrapper that produces them.
//
// Record format, one per line:
//   {"digest":"<sha256 hex>","request":{messages,params},"completion":"..."}

#include <autoscrum/backend.hpp>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace autoscrum
{

inline std::string sha256_hex(std::string_view data)
{
    unsigned char hash[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), hash, &length, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorCode::internal, "sha256 digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i)
    {
        out.push_back(hex[hash[i] >> 4]);
        out.push_back(hex[hash[i] & 0x0f]);
    }
    return out;
}

/// Digest of the canonical request. nlohmann::json keeps object keys sorted,
/// so the result does not depend on the key order of the input objects.
inline std::string request_digest(const nlohmann::json& request)
{
    return sha256_hex(nlohmann::json(request).dump());
}

inline std::string request_digest(const ChatExchange& exchange)
{
    return request_digest(exchange.request_json());
}

struct FixtureEntry
{
    std::string digest;
    nlohmann::json request;
    std::string completion;
};

class FixtureStore
{
  public:
    FixtureStore() = default;

    static FixtureStore from_files(const std::vector<std::filesystem::path>& paths)
    {
        FixtureStore store;
        for (const auto& p: paths)
            store.load(p);
        return store;
    }

    /// Appends every record of a fixture file. Blank lines are ignored.
    void load(const std::filesystem::path& path)
    {
        std::ifstream in(path);
        if (!in)
            throw IoError(path.string(), "cannot open fixture file");
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line))
        {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos)
                continue;
            auto j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object() || !j.contains("request") || !j.contains("completion")
                || !j["completion"].is_string())
                throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed fixture record");
            add(j["request"], j["completion"].get<std::string>());
        }
    }

    void add(const nlohmann::json& request, std::string completion)
    {
        auto digest = request_digest(request);
        _by_digest[digest].push_back(_entries.size());
        _entries.push_back({std::move(digest), request, std::move(completion)});
    }

    [[nodiscard]] const std::vector<FixtureEntry>& entries() const noexcept { return _entries; }

    /// Entry indices recorded for a digest, in file order.
    [[nodiscard]] const std::vector<std::size_t>* lookup(const std::string& digest) const
    {
        auto it = _by_digest.find(digest);
        return it == _by_digest.end() ? nullptr : &it->second;
    }

    /// The stored entry whose canonical request shares the longest prefix with
    /// `request`, with the offset where they first differ.
    [[nodiscard]] std::optional<std::pair<const FixtureEntry*, std::size_t>> nearest(const nlohmann::json& request) const
    {
        auto wanted = nlohmann::json(request).dump();
        const FixtureEntry* best = nullptr;
        std::size_t best_len = 0;
        for (const auto& e: _entries)
        {
            auto have = nlohmann::json(e.request).dump();
            std::size_t n = 0;
            while (n < wanted.size() && n < have.size() && wanted[n] == have[n])
                ++n;
            if (!best || n > best_len)
            {
                best = &e;
                best_len = n;
            }
        }
        if (!best)
            return std::nullopt;
        return std::pair {best, best_len};
    }

  private:
    std::vector<FixtureEntry> _entries;
    std::map<std::string, std::vector<std::size_t>> _by_digest;
};

/// Returns stored completions by request digest. Repeated identical requests
/// consume the recorded duplicates in order.
class ReplayBackend final : public Backend
{
  public:
    explicit ReplayBackend(FixtureStore store): _store(std::move(store)) {}

    std::string complete(const ChatExchange& exchange) override
    {
        auto request = exchange.request_json();
        auto digest = request_digest(request);
        std::lock_guard lock(_mutex);
        const auto* hits = _store.lookup(digest);
        auto& cursor = _cursor[digest];
        if (hits && cursor < hits->size())
            return _store.entries()[(*hits)[cursor++]].completion;

        nlohmann::json extra = {{"digest", digest}};
        std::string message = "no recorded completion for request " + digest;
        if (hits)
            message += " (all " + std::to_string(hits->size()) + " recorded completions consumed)";
        else if (auto near = _store.nearest(request))
        {
            auto canonical = nlohmann::json(request).dump();
            auto at = near->second;
            extra["nearest_digest"] = near->first->digest;
            extra["diverges_at"] = at;
            extra["context"] = canonical.substr(at > 40 ? at - 40 : 0, 120);
            message += "; nearest stored key " + near->first->digest + " diverges at byte " + std::to_string(at);
        }
        throw BackendError(BackendErrorKind::fixture_miss, message, std::move(extra));
    }

  private:
    FixtureStore _store;
    std::mutex _mutex;
    std::map<std::string, std::size_t> _cursor;
};

/// Forwards to `inner` and appends one complete record per successful call.
class RecordingBackend final : public Backend
{
  public:
    RecordingBackend(std::shared_ptr<Backend> inner, std::filesystem::path store_path):
        _inner(std::move(inner)), _path(std::move(store_path))
    {
        if (_path.has_parent_path())
        {
            std::error_code ec;
            std::filesystem::create_directories(_path.parent_path(), ec);
        }
        int fd = ::open(_path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
        if (fd < 0)
            throw IoError(_path.string(), std::strerror(errno));
        ::close(fd);
    }

    std::string complete(const ChatExchange& exchange) override
    {
        auto completion = _inner->complete(exchange);
        auto request = exchange.request_json();
        nlohmann::json record = {
            {"digest", request_digest(request)},
            {"request", std::move(request)},
            {"completion", completion},
        };
        append(record.dump() + "\n");
        return completion;
    }

    [[nodiscard]] const std::filesystem::path& path() const noexcept { return _path; }

  private:
    // One write(2) per record on an O_APPEND descriptor, then fsync: readers
    // only ever observe whole lines.
    void append(const std::string& line)
    {
        std::lock_guard lock(_mutex);
        int fd = ::open(_path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
        if (fd < 0)
            throw IoError(_path.string(), std::strerror(errno));
        std::size_t written = 0;
        while (written < line.size())
        {
            auto n = ::write(fd, line.data() + written, line.size() - written);
            if (n < 0)
            {
                if (errno == EINTR)
                    continue;
                auto msg = std::string(std::strerror(errno));
                ::close(fd);
                throw IoError(_path.string(), msg);
            }
            written += static_cast<std::size_t>(n);
        }
        ::fsync(fd);
        ::close(fd);
    }

    std::shared_ptr<Backend> _inner;
    std::filesystem::path _path;
    std::mutex _mutex;
};

inline std::shared_ptr<Backend> record(std::shared_ptr<Backend> inner, const std::filesystem::path& store_path)
{
    return std::make_shared<RecordingBackend>(std::move(inner), store_path);
}

} // namespace autoscrum
