#pragma once

namespace physmorph {

// Entry point behind the physmorph binary; exposed for in-process testing.
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error,
// 3 gradient-check failure.
int cli_main(int argc, const char* const* argv);

}  // namespace physmorph
