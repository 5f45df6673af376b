#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace vpmu {

/// Literal slash-separated topic, e.g. REGION_1/ZONE_1/Node_2/Topic_1.
class TopicName {
 public:
  static TopicName parse(std::string_view text);
  const std::vector<std::string>& levels() const noexcept { return levels_; }
  std::string str() const;
  bool operator==(const TopicName&) const = default;

 private:
  std::vector<std::string> levels_;
};

/// Topic pattern where a level may be '+' (exactly one level) or a trailing
/// '#' (any remaining levels, including none).
class TopicFilter {
 public:
  static TopicFilter parse(std::string_view text);
  const std::vector<std::string>& levels() const noexcept { return levels_; }
  std::string str() const;
  bool has_wildcards() const;
  auto operator<=>(const TopicFilter&) const = default;

 private:
  std::vector<std::string> levels_;
};

bool topic_matches(const TopicFilter& f, const TopicName& t);

using SubscriberId = std::string;

struct Delivery {
  SubscriberId subscriber;
  std::string topic;
  std::string payload;
};

/// At-most-once topic broker. Subscriptions live in a level-indexed tree; a
/// publish walks it once and delivers to each matching subscriber once.
class Broker {
 public:
  Broker();
  ~Broker();
  Broker(Broker&&) noexcept;
  Broker& operator=(Broker&&) noexcept;

  /// False when the pair was already present.
  bool subscribe(const SubscriberId& who, const TopicFilter& filter);
  bool subscribe(const SubscriberId& who, std::string_view filter) {
    return subscribe(who, TopicFilter::parse(filter));
  }
  bool unsubscribe(const SubscriberId& who, const TopicFilter& filter);

  /// Deliveries in subscriber-id order.
  std::vector<Delivery> publish(const TopicName& topic, std::string_view payload);
  std::vector<Delivery> publish(std::string_view topic, std::string_view payload) {
    return publish(TopicName::parse(topic), payload);
  }

  std::size_t subscription_count() const noexcept { return count_; }

 private:
  struct Node;
  std::unique_ptr<Node> root_;
  std::size_t count_ = 0;
};

}  // namespace vpmu
