from .tasks import entry_to_sample, opinion_annotation, opinion_match, prompt_program
from .utils import micro_f1

__all__ = ["entry_to_sample", "micro_f1", "opinion_annotation", "opinion_match", "prompt_program"]
