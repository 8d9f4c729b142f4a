"""Entropy-based prediction of protocols carried inside DNS tunnels.

Library layout:

  capture     classic-pcap reading/writing, IPv4/DNS packet decoding
  entropy     per-packet Shannon entropy, abstraction levels, series CSV
  tunnel      Iodine-style tunnel codec and capture synthesizer
  classifier  mean-difference scoring, window sampling, prediction
  evaluation  confusion matrix, derived metrics, manifest batch runs
  corpus      synthetic plain-traffic generators for experiments
  cli         the `tunnelscope` command
"""

from .capture import (
    Capture,
    DnsQueryView,
    PacketRecord,
    Transport,
    decode_packet,
    parse_dns_qname,
    read_capture,
    write_capture,
)
from .classifier import (
    DEFAULT_SEED,
    GroundTruthProfile,
    PredictionResult,
    SamplingPolicy,
    mean_diff,
    predict,
    sample_windows,
    score_against,
)
from .entropy import (
    AbstractionLevel,
    EntropySeries,
    LevelKind,
    extract_series,
    shannon_entropy,
)
from .errors import TunnelScopeError
from .evaluation import (
    ConfusionMatrix,
    MetricReport,
    confusion_matrix,
    metrics,
    run_experiment,
)
from .tunnel import (
    Codec,
    RecordType,
    TunnelConfig,
    TunnelHeader,
    basen_decode,
    basen_encode,
    decode_downstream,
    decode_upstream,
    encode_downstream,
    encode_upstream,
    synthesize_capture,
)

__version__ = "0.1.0"
