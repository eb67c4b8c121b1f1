"""Bounded-delay AIFV code forests: construction, coding, benchmarks."""

from .bitstrings import (
    BitString,
    CapacityError,
    DyadicInterval,
    EMPTY,
    append,
    common_prefix,
    comparable,
    flipped,
    interval_of,
    is_prefix,
    reduced,
)
from .builder import (
    BuildConfig,
    BuildError,
    OptimalityReport,
    check_g_optimality_binary,
    construct,
    construct_aifvm,
    expected_code_length,
    folded_codebook_size,
    huffman,
)
from .forest import (
    CodeForest,
    CodeTree,
    DecodeError,
    decode,
    decoding_delay_bound,
    encode,
    format_codebook,
    parse_codebook,
    validate_full,
    validate_rule1,
)
from .modes import (
    ContinuousModeId,
    Mode,
    enumerate_basic_modes,
    enumerate_continuous_ids,
    id_of_mode,
    mode_from_id,
    mode_interval,
)
from .optimizer import ResourceLimitError, brute_force_binary, build_ilp, solve_ilp
from .sources import (
    SourceDistribution,
    entropy,
    relative_redundancy,
    sample_inversion,
    sources_binary_grid,
    sources_polynomial,
)

__version__ = "0.1.0"
