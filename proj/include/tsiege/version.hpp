#pragma once

#define TSIEGE_VERSION_MAJOR 1
#define TSIEGE_VERSION_MINOR 0
#define TSIEGE_VERSION_PATCH 0
#define TSIEGE_VERSION "1.0.0"

namespace tsiege {
inline constexpr int schema_version = 1;
}
