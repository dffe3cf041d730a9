import logging

from app.tasks.celery_app import celery_app
from app.services.trainer_service import shard_expected_counts

logger = logging.getLogger(__name__)


@celery_app.task(bind=True, name="estep_shard")
def estep_shard(self, payload: dict) -> dict:
    """
    E-step for one corpus shard.

    Args:
        payload: {"words": [[word, count], ...], "scores": {piece: score},
                  "max_piece_len": int}

    Returns:
        {"counts": {piece: expected count}, "loglik": float}
    """
    words = [(word, int(count)) for word, count in payload["words"]]
    logger.info(f"E-step task {self.request.id}: {len(words)} word type(s)")
    counts, loglik = shard_expected_counts(words, payload["scores"], int(payload["max_piece_len"]))
    return {"counts": counts, "loglik": loglik}
