#pragma once

#include <array>
#include <cctype>
#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

namespace attachnlp {

// Three-way attachment classification target. Iteration order is fixed as
// (avoidant, secure, preoccupied) so that matrices, reports and tie-breaks
// are deterministic everywhere in the pipeline.
enum class AttachmentLabel : int {
  Avoidant = 0,
  Secure = 1,
  Preoccupied = 2,
};

inline constexpr std::size_t kNumLabels = 3;

inline constexpr std::array<AttachmentLabel, kNumLabels> kLabelOrder = {
    AttachmentLabel::Avoidant,
    AttachmentLabel::Secure,
    AttachmentLabel::Preoccupied,
};

constexpr std::size_t label_index(AttachmentLabel label) {
  return static_cast<std::size_t>(label);
}

constexpr std::string_view label_name(AttachmentLabel label) {
  switch (label) {
    case AttachmentLabel::Avoidant:
      return "avoidant";
    case AttachmentLabel::Secure:
      return "secure";
    case AttachmentLabel::Preoccupied:
      return "preoccupied";
  }
  return "?";
}

// Case-insensitive parse of the wire names.
inline std::optional<AttachmentLabel> parse_label(std::string_view text) {
  std::string lowered(text);
  for (char& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (AttachmentLabel label : kLabelOrder) {
    if (lowered == label_name(label)) return label;
  }
  return std::nullopt;
}

inline std::ostream& operator<<(std::ostream& os, AttachmentLabel label) {
  return os << label_name(label);
}

}  // namespace attachnlp
