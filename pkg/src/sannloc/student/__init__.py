"""Student modelling: knowledge tracing, grade regression and their metrics."""

from .dkt import (
    DktConfig,
    DktModel,
    SingleStudentSplitViolation,
    TraceTooShort,
    dkt_auc,
    dkt_predict,
    dkt_scores,
    dkt_train,
    encode_dkt_step,
    load_dkt,
    save_dkt,
)
from .grades import (
    GradeConfig,
    GradeModel,
    assemble_grade_features,
    clamp_grade,
    grade_predict,
    grade_train,
    load_grade,
    save_grade,
)
from .metrics import SingleClassSet, ZeroVarianceTruth, auc, regression_metrics
