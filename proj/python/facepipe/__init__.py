"""Video descriptor pooling, prediction heads, linear classification and
evaluation for face-embedding pipelines."""

from ._facepipe import (  # noqa: F401
    DegenerateError,
    DegenerateLabelsError,
    EmptyInputError,
    Error,
    FormatError,
    IoError,
    LinearModel,
    NumericError,
    OutOfRangeError,
    ParamError,
    ParseError,
    ProtocolError,
    RefError,
    ShapeError,
    TruncationError,
    accuracy_and_confusion,
    binary_ce,
    class_weights,
    cli_run,
    expected_age,
    generate_dataset,
    group_pool_frame,
    group_pool_video,
    knn_predict,
    l2_normalize,
    mean_absolute_error,
    pool_manifest,
    rank1_identification,
    read_embedding_file,
    reduce_scores_8_to_7,
    softmax,
    stat_pool_video,
    subset_report,
    train_linear_svm,
    weighted_ce_grad,
    weighted_ce_loss,
    write_embedding_file,
)

__version__ = "0.1.0"
