"""Two-phase tweet classifier with user-timeline profiles.

Phase one fine-tunes word embeddings through an LSTM classifier; phase two
trains gradient-boosted trees on averaged-embedding tweet vectors, optionally
concatenated with an averaged-embedding profile of the author's recent
timeline. The evaluation layer provides tweet-level and user-level
cross-validation plus timeline-length bin reports.
"""

from .corpus import (
    Dataset,
    LabelScheme,
    SynthConfig,
    Tweet,
    UserTimeline,
    activity_distribution,
    fuse_datasets,
    load_dataset,
    load_timelines,
    synth_corpus,
)
from .evaluation import (
    BinReport,
    ConfusionMatrix,
    FoldPlan,
    MetricsReport,
    ProfileMode,
    SplitMode,
    bin_by_timeline_length,
    metrics_from_confusion,
    micro_macro,
    run_experiment,
    split_by_tweet,
    split_by_user,
)
from .gbdt import GBDTConfig, GBDTModel, fit_gbdt, predict_gbdt, staged_training_loss
from .profiles import featurize, timeline_vector, tweet_vector
from .recurrent import (
    RecurrentConfig,
    RecurrentModel,
    extract_embeddings,
    forward,
    gradient_check,
    train_recurrent,
)
from .text import (
    Vocabulary,
    average_embedding,
    build_vocab,
    init_embeddings,
    load_pretrained_embeddings,
    tokenize,
)

__version__ = "0.1.0"
