// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace lesiongraph {

// Routes library logging to stderr at the level named by LESIONGRAPH_LOG
// (trace, debug, info, warn, error, off; default info). Safe to call repeatedly.
void init_logging();

}  // namespace lesiongraph
