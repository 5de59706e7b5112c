"""clickseg: segment unlabeled click-data event logs into process cases.

Pipeline: build a link-graph-pruned weighted transition system from per-user
click streams, sample a training log from it, train a CBOW model with an
explicit boundary token, and split each user stream at the detected
boundary-score peaks.
"""

from .cbow import (
    BOUNDARY_TOKEN,
    CbowModel,
    TrainConfig,
    Vocabulary,
    boundary_scores,
    build_vocab,
    load_model,
    predict_center,
    save_model,
    train,
    train_ensemble,
)
from .errors import (
    ClickSegError,
    ConfigError,
    DataError,
    DegenerateModelError,
    EventLogParseError,
    LinkGraphParseError,
    ModelFormatError,
    SchemaError,
    TrainingDataError,
    UnknownTokenError,
)
from .evaluation import (
    Dfg,
    GroundTruthLog,
    boundary_metrics,
    discover_dfg,
    export_dot,
    summarize_cases,
    synthesize_ground_truth,
)
from .log_ingest import (
    ColumnSchema,
    Event,
    EventLog,
    LinkGraph,
    UserStream,
    load_event_log,
    load_link_graph,
    parse_event_log,
    parse_link_graph,
    split_by_user,
    write_event_log,
)
from .segmenter import (
    Case,
    SegmentationParams,
    SegmentedLog,
    detect_boundaries,
    save_segmented_csv,
    segment_log,
    split_stream,
)
from .trace_sampler import (
    build_training_sequences,
    generate_training_log,
    read_traces,
    sample_trace,
    write_traces,
)
from .transition_system import (
    FINAL,
    INITIAL,
    TAU,
    Transition,
    TsState,
    WeightedTransitionSystem,
    build_merged_ts,
    filter_rare,
    l_end,
    l_start,
    l_trans,
    path_likelihood,
    prune_with_link_graph,
    start_distribution,
    to_dot,
)

__version__ = "0.1.0"
