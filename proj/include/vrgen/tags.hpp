#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace vrgen {

// Attack-entity tag set. Order is significant: the first ten are entity
// classes (loss weight 10), O is last (loss weight 1).
enum class EntityTag : std::size_t {
  Vector,
  Technique,
  Impact,
  Means,
  Platform,
  Os,
  Version,
  Protocol,
  Port,
  Privilege,
  O,
};

inline constexpr std::size_t kTagCount = 11;
inline constexpr std::size_t kEntityTagCount = 10;

inline constexpr std::array<EntityTag, kTagCount> kAllTags = {
    EntityTag::Vector, EntityTag::Technique, EntityTag::Impact,   EntityTag::Means,
    EntityTag::Platform, EntityTag::Os,      EntityTag::Version,  EntityTag::Protocol,
    EntityTag::Port,   EntityTag::Privilege, EntityTag::O,
};

// Entity blocks of the completion feature vector, in block order.
inline constexpr std::size_t kFeatureBlockCount = 9;
inline constexpr std::array<EntityTag, kFeatureBlockCount> kFeatureTags = {
    EntityTag::Vector,   EntityTag::Technique, EntityTag::Impact,  EntityTag::Means,    EntityTag::Platform,
    EntityTag::Os,       EntityTag::Version,   EntityTag::Protocol, EntityTag::Port,
};

constexpr std::size_t index_of(EntityTag tag) { return static_cast<std::size_t>(tag); }
constexpr EntityTag tag_at(std::size_t index) { return static_cast<EntityTag>(index); }

constexpr double loss_weight(EntityTag tag) { return tag == EntityTag::O ? 1.0 : 10.0; }

std::string_view tag_name(EntityTag tag);
std::optional<EntityTag> parse_tag(std::string_view name);

// Block index of a feature entity, or nullopt for PRIVILEGE / O.
std::optional<std::size_t> feature_block(EntityTag tag);

}  // namespace vrgen
