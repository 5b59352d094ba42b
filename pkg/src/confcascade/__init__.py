"""Cost-aware cascade classification engine.

Routes each document either to a cheap calibrated classifier over
precomputed embeddings or, when confidence falls below a tuned threshold,
to an LLM completion backend; includes the cross-validated evaluation
harness and time/CO2/dollar accounting.
"""

from .classifier import (
    CalibratedModel,
    ProbabilityVector,
    expected_calibration_error,
    load_model,
    predict_proba,
    save_model,
    train,
)
from .corpus import Corpus, Document, FoldPlan, load_corpus, split, stratified_folds
from .embeddings import EmbeddingMatrix, read_embeddings, write_embeddings
from .gateway import (
    BackendConfig,
    LlmVerdict,
    MockBackend,
    PromptTemplate,
    ReplayBackend,
    classify,
    classify_batch,
    render_prompt,
)
from .ledger import CostLedger, CostModel, PhaseTiming, co2_kg, dollars, total_time
from .metrics import FoldScores, TTestVerdict, fold_summary, macro_f1, paired_t_test
from .router import RouterConfig, RoutingOutcome, audit, route, sweep, tune_threshold

__version__ = "0.1.0"
