#include "vpmu/broker.hpp"

#include "vpmu/error.hpp"

namespace vpmu {

namespace {

std::vector<std::string> split_levels(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find('/', start);
    out.emplace_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& levels) {
  std::string out;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (i) out += '/';
    out += levels[i];
  }
  return out;
}

}  // namespace

TopicName TopicName::parse(std::string_view text) {
  if (text.empty()) throw ValidationError("empty topic name");
  TopicName t;
  t.levels_ = split_levels(text);
  for (const auto& l : t.levels_) {
    if (l.empty()) throw ValidationError("topic '" + std::string(text) + "' has an empty level");
    if (l.find_first_of("#+") != std::string::npos)
      throw ValidationError("topic name '" + std::string(text) + "' contains a wildcard");
  }
  return t;
}

std::string TopicName::str() const { return join(levels_); }

TopicFilter TopicFilter::parse(std::string_view text) {
  if (text.empty()) throw ValidationError("empty topic filter");
  TopicFilter f;
  f.levels_ = split_levels(text);
  for (std::size_t i = 0; i < f.levels_.size(); ++i) {
    const auto& l = f.levels_[i];
    if (l.empty()) throw ValidationError("filter '" + std::string(text) + "' has an empty level");
    if (l == "#") {
      if (i + 1 != f.levels_.size())
        throw ValidationError("'#' must be the last level of '" + std::string(text) + "'");
    } else if (l != "+" && l.find_first_of("#+") != std::string::npos) {
      throw ValidationError("wildcard must occupy a whole level in '" + std::string(text) + "'");
    }
  }
  return f;
}

std::string TopicFilter::str() const { return join(levels_); }

bool TopicFilter::has_wildcards() const {
  for (const auto& l : levels_)
    if (l == "+" || l == "#") return true;
  return false;
}

bool topic_matches(const TopicFilter& f, const TopicName& t) {
  const auto& fl = f.levels();
  const auto& tl = t.levels();
  std::size_t i = 0;
  for (; i < fl.size(); ++i) {
    if (fl[i] == "#") return true;
    if (i >= tl.size()) return false;
    if (fl[i] != "+" && fl[i] != tl[i]) return false;
  }
  return i == tl.size();
}

struct Broker::Node {
  std::map<std::string, std::unique_ptr<Node>> children;
  std::set<SubscriberId> exact;  // filters ending at this node
  std::set<SubscriberId> multi;  // filters ending in '#' below this node

  void collect(const std::vector<std::string>& levels, std::size_t depth,
               std::set<SubscriberId>& out) const {
    out.insert(multi.begin(), multi.end());
    if (depth == levels.size()) {
      out.insert(exact.begin(), exact.end());
      return;
    }
    if (auto it = children.find(levels[depth]); it != children.end())
      it->second->collect(levels, depth + 1, out);
    if (auto it = children.find("+"); it != children.end())
      it->second->collect(levels, depth + 1, out);
  }
};

Broker::Broker() : root_(std::make_unique<Node>()) {}
Broker::~Broker() = default;
Broker::Broker(Broker&&) noexcept = default;
Broker& Broker::operator=(Broker&&) noexcept = default;

bool Broker::subscribe(const SubscriberId& who, const TopicFilter& filter) {
  Node* n = root_.get();
  const auto& lv = filter.levels();
  for (std::size_t i = 0; i < lv.size(); ++i) {
    if (lv[i] == "#") {
      const bool added = n->multi.insert(who).second;
      count_ += added;
      return added;
    }
    auto& child = n->children[lv[i]];
    if (!child) child = std::make_unique<Node>();
    n = child.get();
  }
  const bool added = n->exact.insert(who).second;
  count_ += added;
  return added;
}

bool Broker::unsubscribe(const SubscriberId& who, const TopicFilter& filter) {
  Node* n = root_.get();
  const auto& lv = filter.levels();
  for (std::size_t i = 0; i < lv.size(); ++i) {
    if (lv[i] == "#") {
      const bool removed = n->multi.erase(who) != 0;
      count_ -= removed;
      return removed;
    }
    auto it = n->children.find(lv[i]);
    if (it == n->children.end()) return false;
    n = it->second.get();
  }
  const bool removed = n->exact.erase(who) != 0;
  count_ -= removed;
  return removed;
}

std::vector<Delivery> Broker::publish(const TopicName& topic, std::string_view payload) {
  std::set<SubscriberId> targets;
  root_->collect(topic.levels(), 0, targets);
  std::vector<Delivery> out;
  out.reserve(targets.size());
  const auto name = topic.str();
  for (const auto& who : targets) out.push_back({who, name, std::string(payload)});
  return out;
}

}  // namespace vpmu
