from inspect_ai.scorer import SampleScore, Value, metric

from opinion_forge.metrics import prf


@metric
def micro_f1():
    """Micro-averaged exact-match F1 over all opinions of all samples."""

    def metric_fn(scores: list[SampleScore]) -> Value:
        if not scores:
            return 0.0

        n_matched = n_gold = n_pred = 0
        for sample_score in scores:
            counts = sample_score.score.metadata or {}
            n_matched += counts.get("matched", 0)
            n_gold += counts.get("gold", 0)
            n_pred += counts.get("pred", 0)

        return prf(n_matched, n_gold, n_pred)[2]

    return metric_fn
