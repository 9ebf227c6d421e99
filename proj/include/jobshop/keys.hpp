#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace jobshop {

struct KeyHash {
    std::size_t operator()(const std::vector<std::int64_t>& key) const noexcept {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (std::int64_t v : key) {
            h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
            h *= 0x100000001b3ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

}  // namespace jobshop
