"""
Restricted numpy expressions used by run configurations for custom samplers
"""
from __future__ import annotations

import ast

import numpy as np

from dunes_project.exceptions import ConfigError

FUNCTIONS = {
    'sin': np.sin,
    'cos': np.cos,
    'exp': np.exp,
    'sqrt': np.sqrt,
    'abs': np.abs,
}
CONSTANTS = {'pi': np.pi}

ALLOWED_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.Mod, ast.USub, ast.UAdd,
)


def compile_expression(text, variables):
    """
    Compile `text` into a function of the given variable names

    Only arithmetic, numeric literals, the variables, `pi` and the functions
    in FUNCTIONS are accepted; anything else raises ConfigError.
    """
    try:
        tree = ast.parse(text.strip(), mode='eval')
    except SyntaxError as exc:
        raise ConfigError(f'cannot parse expression {text!r}: {exc.msg}')

    allowed_names = set(variables) | set(FUNCTIONS) | set(CONSTANTS)
    for node in ast.walk(tree):
        if not isinstance(node, ALLOWED_NODES):
            raise ConfigError(f'expression {text!r} uses unsupported syntax {type(node).__name__}')
        if isinstance(node, ast.Name) and node.id not in allowed_names:
            raise ConfigError(f'expression {text!r} uses unknown name {node.id!r}')
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in FUNCTIONS):
            raise ConfigError(f'expression {text!r} calls something other than {sorted(FUNCTIONS)}')
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ConfigError(f'expression {text!r} contains a non-numeric literal')

    code = compile(tree, '<expression>', 'eval')
    namespace = {'__builtins__': {}, **FUNCTIONS, **CONSTANTS}

    def evaluate(*args):
        scope = dict(zip(variables, args))
        result = eval(code, namespace, scope)
        shape = np.broadcast(*args).shape if args else ()
        return np.broadcast_to(np.asarray(result, dtype=float), shape)

    evaluate.source = text.strip()
    return evaluate
