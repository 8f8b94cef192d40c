#include "ssmf/corpus.hpp"

#include <algorithm>
#include <unordered_set>

namespace ssmf::corpus {
namespace {

// English stoplist, version "en-1". Changing the list changes every
// vocabulary downstream; bump the version string with it.
const std::vector<std::string> kStoplist = {
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and",
    "any", "are", "aren", "as", "at", "be", "because", "been", "before", "being",
    "below", "between", "both", "but", "by", "can", "couldn", "did", "didn", "do",
    "does", "doesn", "doing", "don", "down", "during", "each", "few", "for", "from",
    "further", "had", "hadn", "has", "hasn", "have", "haven", "having", "he", "her",
    "here", "hers", "herself", "him", "himself", "his", "how", "i", "if", "in",
    "into", "is", "isn", "it", "its", "itself", "just", "ll", "me", "more",
    "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on",
    "once", "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own",
    "re", "same", "she", "should", "shouldn", "so", "some", "such", "than", "that",
    "the", "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this",
    "those", "through", "to", "too", "under", "until", "up", "ve", "very", "was",
    "wasn", "we", "were", "weren", "what", "when", "where", "which", "while", "who",
    "whom", "why", "will", "with", "won", "would", "wouldn", "you", "your", "yours",
    "yourself", "yourselves",
};

const std::unordered_set<std::string_view>& stop_set() {
    static const std::unordered_set<std::string_view> set(kStoplist.begin(), kStoplist.end());
    return set;
}

} // namespace

const std::vector<std::string>& stoplist() { return kStoplist; }

std::string_view stoplist_version() { return "en-1"; }

bool is_stopword(std::string_view token) { return stop_set().contains(token); }

} // namespace ssmf::corpus
