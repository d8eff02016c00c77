from ._hgdr import (
    Experiment,
    InteractionLog,
    ParseError,
    SplitDataset,
    bpr_loss,
    evaluate,
    gradcheck,
    hr_ndcg,
    parse_log,
    parse_text,
    rank_of_positive,
    read_split,
    split,
    stats,
    stats_table,
    synth,
    train,
)

__all__ = [
    "Experiment",
    "InteractionLog",
    "ParseError",
    "SplitDataset",
    "bpr_loss",
    "evaluate",
    "gradcheck",
    "hr_ndcg",
    "parse_log",
    "parse_text",
    "rank_of_positive",
    "read_split",
    "split",
    "stats",
    "stats_table",
    "synth",
    "train",
]
