"""Packet Header Matching: Hopfield-weight header classification for intrusion rules."""
from .baseline import BaselinePatternSet, baseline_match, compile_baseline
from .header_codec import (Header5Tuple, Rule, RuleParseError, chunks, encode_header,
                           load_rules, parse_rule_line, render_rule)
from .hopfield_weights import (WeightStore, build_weight_store, energy, outer_product,
                               sign_sum, weight_index)
from .matcher import (LearningCache, MatchResult, RuleGroupTable, classify_first_chunk,
                      compile_rules, match_header)
from .trace_io import TraceFile, TraceGenSpec, generate_trace, read_trace, write_trace

__version__ = "0.1.0"
