#ifndef GPCPD_VERSION_HPP
#define GPCPD_VERSION_HPP

namespace gpcpd {
inline constexpr const char* kVersion = "0.1.0";
}

#endif
