#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace prefopt {

enum class ErrKind {
  shape,   // operand shapes do not conform
  domain,  // input outside a primitive's mathematical domain
  value,   // invalid argument or state
  io,      // file / parse failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrKind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}
  ErrKind kind() const noexcept { return kind_; }

 private:
  ErrKind kind_;
};

namespace detail {

inline void msg_append(std::ostringstream&) {}

template <class T, class... Rest>
void msg_append(std::ostringstream& os, const T& head, const Rest&... rest) {
  os << head;
  msg_append(os, rest...);
}

}  // namespace detail

template <class... Parts>
std::string msg(const Parts&... parts) {
  std::ostringstream os;
  detail::msg_append(os, parts...);
  return os.str();
}

template <class... Parts>
[[noreturn]] void fail(ErrKind kind, const Parts&... parts) {
  throw Error(kind, msg(parts...));
}

}  // namespace prefopt
