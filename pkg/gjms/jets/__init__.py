"""
Jet arithmetic and the expression language.

Modules:
- series: truncated Taylor jets, index contraction, restriction along maps
- expressions: lexer, parser, AST and jet evaluation
"""

from gjms.jets.expressions import (
    ExprNode,
    as_expression,
    evaluate,
    exp_of,
    parse,
    product,
    total,
)
from gjms.jets.series import (
    Jet,
    MultiIndexTable,
    Restriction,
    contract,
    get_table,
    inverse,
    jet_variable,
    partial,
    stack,
    table_size,
)

__all__ = [
    "ExprNode",
    "Jet",
    "MultiIndexTable",
    "Restriction",
    "as_expression",
    "contract",
    "evaluate",
    "exp_of",
    "get_table",
    "inverse",
    "jet_variable",
    "parse",
    "partial",
    "product",
    "stack",
    "table_size",
    "total",
]
