"""Bug report quality toolkit: CTQRS scoring, template structuring via LLM
backends, the mining/synthesis/split dataset pipeline, and the evaluation
harness."""

from .ctqrs import CtqrsBreakdown, CtqrsScorer, RuleId, RuleResult, score, score_percent
from .errors import (
    AuthFailed,
    IoFailure,
    MalformedDocument,
    MalformedGeneration,
    NothingToMask,
    PartialFetch,
    ProviderUnavailable,
    ReportsmithError,
    RetentionFailed,
    TimedOut,
)
from .gateway import (
    BackendConfig,
    GenerationResult,
    HashedBagEmbedding,
    MockBackend,
    MockBehavior,
    TrainingRecipe,
    build_alpaca_prompt,
    build_fewshot_messages,
    build_synthesis_prompt,
    chat_complete,
    embed,
    mock_backend,
    parse_generation,
)
from .harness import (
    AggregateReport,
    ConfusionCounts,
    EvalOutcome,
    EvalRow,
    TestCase,
    emit_report,
    evaluate_generation,
    mapping_eval,
    mask_section,
    missing_detection_eval,
    run_suite,
)
from .pipeline import (
    BugComment,
    BugzillaBug,
    FilterOutcome,
    InstructionExample,
    SplitRatios,
    SynthesisConfig,
    export_instruction_jsonl,
    fetch_fixed_bugs,
    filter_corpus,
    filter_report,
    split_dataset,
    synthesize_unstructured,
)
from .report_model import (
    ArtifactKind,
    ArtifactSpan,
    RawReport,
    SectionKind,
    StructuredReport,
    detect_artifacts,
    json_to_report,
    parse_sections,
    render_report,
    report_to_json,
)
from .textmetrics import (
    MetricReport,
    compute_metric_report,
    cosine_tf,
    embedding_similarity,
    meteor,
    rouge1,
    split_sentences,
    tokenize,
)

__version__ = "0.1.0"
