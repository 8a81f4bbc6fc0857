#pragma once

#include <cstdint>
#include <string_view>

#include <nlohmann/json.hpp>

#include "scriptboard/backends.hpp"

namespace scriptboard {

/// Offline stand-ins for the model calls, keyed by reply schema. Each is a
/// pure function of the request and the backend seed.
MockResponderTable default_mock_responders();

/// Refinement responder that proposes random values, empty strings and
/// contradictions, and sometimes replies without a JSON block.
MockResponder adversarial_refine_responder(std::uint64_t salt);

/// Quote-and-speech-verb attribution used by the mock extraction reply.
nlohmann::json mock_prose_extraction(std::string_view text);

} // namespace scriptboard
