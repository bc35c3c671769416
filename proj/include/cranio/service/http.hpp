// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cranio/service/service.hpp"

namespace httplib {
class Server;
}

namespace cranio {

/// REST routes under /api over `service`.
void install_routes(httplib::Server& server, PlanningService& service);

}  // namespace cranio
