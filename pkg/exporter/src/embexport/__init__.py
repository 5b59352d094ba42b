"""CLS-embedding exporter: encoder checkpoint -> CGEM file."""

from .cgem import read_cgem, write_cgem
from .export import ExportError, ExportJob, export, load_corpus_texts
from .verify import VerifyReport, verify

__version__ = "0.1.0"
