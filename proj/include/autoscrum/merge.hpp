// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <autoscrum/backlog.hpp>

#include <set>
#include <string>
#include <vector>

namespace autoscrum
{

template <class T>
struct MergeResult
{
    std::vector<T> merged;
    std::vector<T> rejected;
};

/// existing ++ generated, dropping generated items whose key collides
/// (ignoring ASCII case) with an existing item or an earlier generated one.
/// Existing items are never touched.
template <class T, class KeyFn>
MergeResult<T> merge_items(const std::vector<T>& existing, const std::vector<T>& generated, KeyFn key)
{
    MergeResult<T> out;
    out.merged = existing;
    std::set<std::string> seen;
    for (const auto& item: existing)
        seen.insert(case_fold(key(item)));
    for (const auto& item: generated)
    {
        if (seen.insert(case_fold(key(item))).second)
            out.merged.push_back(item);
        else
            out.rejected.push_back(item);
    }
    return out;
}

template <class T>
MergeResult<T> merge_by_name(const std::vector<T>& existing, const std::vector<T>& generated)
{
    return merge_items(existing, generated, [](const T& item) -> const std::string& { return item.name; });
}

} // namespace autoscrum
