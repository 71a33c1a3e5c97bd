"""
ctxrep Services
Persistence and rendering around the engines
"""

from ctxrep.services.corpus_store import load_corpus, save_corpus, load_matrix, save_matrix
from ctxrep.services.report_service import render_table, render_stats, parse_table_csv

__all__ = [
    "load_corpus",
    "save_corpus",
    "load_matrix",
    "save_matrix",
    "render_table",
    "render_stats",
    "parse_table_csv",
]
