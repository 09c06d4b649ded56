from ._metrics import relative_l2, accuracy_metric, cosine_similarity, similarity_matrix, confidence_interval
from ._memory import SemanticMemory
from ._training import (TrainConfig, make_training_pairs, relative_l2_loss, mse_loss, train_foundation,
                        combinatorial_transfer, activate_task)
from ._rollout import RolloutSpec, rollout, rollout_batch, evaluate_rollout, one_step_accuracy
from ._checkpoint import save_checkpoint, load_checkpoint
from ._report import RunLog, accuracy_rows, write_metrics_csv, write_similarity_csv

__all__ = ['relative_l2', 'accuracy_metric', 'cosine_similarity', 'similarity_matrix', 'confidence_interval',
           'SemanticMemory', 'TrainConfig', 'make_training_pairs', 'relative_l2_loss', 'mse_loss', 'train_foundation',
           'combinatorial_transfer', 'activate_task', 'RolloutSpec', 'rollout', 'rollout_batch', 'evaluate_rollout',
           'one_step_accuracy', 'save_checkpoint', 'load_checkpoint', 'RunLog', 'accuracy_rows',
           'write_metrics_csv', 'write_similarity_csv']
