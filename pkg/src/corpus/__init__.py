from .generator import generate_source, write_corpus
from .loader import CORPUS_ROOT, MOTIVATION, SCENARIOS, load_module, module_paths, scenario_paths
