#include "reco/hash.hpp"

#include <cstdio>

namespace reco {

std::string Fnv1a64::hex() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(state_));
    return buf;
}

}  // namespace reco
