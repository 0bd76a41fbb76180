#pragma once

#include <cstdint>
#include <map>
#include <set>

#include "llmrerank/ingest.hpp"
#include "llmrerank/llm_client.hpp"

namespace llmrerank {

/// Scripted model behaviours that understand this project's prompts.

/// Echoes the listed candidates (or ranking) in prompt order; answers
/// summarization prompts with the first 15 words of the overview.
Responder make_echo_responder();

/// Ranks the user's relevant candidates first. Each candidate's relevance is
/// perceived correctly with probability `fidelity`, drawn from a stream keyed
/// by (seed, prompt), so different shuffles see different noise.
Responder make_oracle_responder(std::map<UserId, std::set<ItemId>> relevance, double fidelity = 1.0,
                                std::uint64_t seed = 7);

}  // namespace llmrerank
