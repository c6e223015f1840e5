// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#include "tailor/errors.hpp"

namespace tailor {

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const DegenerateData*>(&e)) return 4;
    if (dynamic_cast<const BackendUnavailable*>(&e)) return 3;
    if (dynamic_cast<const MalformedResponse*>(&e)) return 3;
    if (dynamic_cast<const PreconditionViolation*>(&e)) return 2;
    return 1;
}

}  // namespace tailor
