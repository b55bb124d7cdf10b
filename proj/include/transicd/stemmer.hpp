#pragma once

#include <string>
#include <string_view>

namespace transicd::preprocess {

// English Snowball stemmer (Porter2, Snowball 3 rule set). Input is expected
// lowercase UTF-8; non-ASCII code points are treated as consonants.
std::string snowball_stem(std::string_view word);

}  // namespace transicd::preprocess
