#pragma once

#include <string>
#include <string_view>

namespace logic_orm::detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // path prefix without trailing '/'
};

inline SplitUrl split_url(std::string_view url) {
  const auto scheme = url.find("://");
  const auto path_start =
      url.find('/', scheme == std::string_view::npos ? 0 : scheme + 3);
  SplitUrl out;
  out.origin = std::string(url.substr(0, path_start));
  if (path_start != std::string_view::npos) {
    out.path = std::string(url.substr(path_start));
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  }
  return out;
}

}  // namespace logic_orm::detail
