#pragma once

#include "hsd/core/error.hpp"

#include <array>
#include <string>
#include <string_view>

namespace hsd {

inline constexpr int num_classes = 3;

// Class ids follow the dataset's `class` column.
enum class Label : int {
    hate_speech = 0,
    offensive_language = 1,
    neither = 2,
};

inline constexpr std::array<std::string_view, num_classes> label_names = {"hate_speech", "offensive_language",
                                                                          "neither"};
inline constexpr std::array<std::string_view, num_classes> label_titles = {"Hate Speech", "Offensive Language",
                                                                           "Neither"};

constexpr bool is_valid_class(int c) noexcept { return c >= 0 && c < num_classes; }

inline std::string_view label_name(int c) {
    if (!is_valid_class(c)) {
        throw ConfigError("class id out of range: " + std::to_string(c));
    }
    return label_names[static_cast<std::size_t>(c)];
}

}  // namespace hsd
