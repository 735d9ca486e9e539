#pragma once

// Code-version stamp embedded in every report so a result can always be tied
// back to the build that produced it. The build system injects the current
// revision; ad-hoc compiles fall back to "dev".

#ifndef OPLAB_VERSION_HASH
#define OPLAB_VERSION_HASH "dev"
#endif

namespace oplab {

inline const char* versionHash() { return OPLAB_VERSION_HASH; }

}  // namespace oplab
