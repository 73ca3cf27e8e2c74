#pragma once

#include <span>
#include <string>
#include <vector>

namespace lect {

struct Category {
  std::string name;
  std::vector<std::string> keywords;
};

/// A coarse subject area: the class labels it typically contains, the
/// register words its texts share, and the neighboring categories a domain
/// expert would name. Neighbors may coincide with member labels; the
/// generator skips any that are IND classes.
struct Domain {
  std::string name;
  std::vector<std::string> member_labels;
  std::vector<std::string> register_words;
  std::vector<Category> adjacent;
};

/// Built-in lexicon backing the offline template generator.
const std::vector<Domain>& domain_lexicon();

/// Index of the domain whose member labels and register words best match the
/// given class names (ties broken by lexicon order).
std::size_t classify_domain(std::span<const std::string> class_names);

/// Word pool used by the random-text generator: every register word and
/// category keyword of every domain, in lexicon order.
const std::vector<std::string>& random_text_vocabulary();

}  // namespace lect
