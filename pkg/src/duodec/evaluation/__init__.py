from .dataset import DatasetRecord, read_dataset, read_ndjson, synthesize, write_ndjson
from .metrics import bleu, corpus_wer, edit_distance, sequence_accuracy, wer
from .report import EvalReport, evaluate_outputs
