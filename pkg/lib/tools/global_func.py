from ..errors import ModelFileError

REQUIRED_KEYS = ['n', 'r', 'rprime', 'rho']


def _require_int(value, location):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ModelFileError(f"expected an integer, got {type(value).__name__}", location=location)
    if value < 0:
        raise ModelFileError(f"expected a nonnegative integer, got {value}", location=location)
    return value


def _require_poly_text(value, location):
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise ModelFileError(f"expected a polynomial string, got {type(value).__name__}", location=location)


def validate_model_file_structure(model_data):
    """Validate that a model document has the required structure (not the Lie pair axioms)"""
    if not isinstance(model_data, dict):
        raise ModelFileError("Model file must be a JSON object")

    for key in REQUIRED_KEYS:
        if key not in model_data:
            raise ModelFileError(f"Missing required key: {key}", location=key)

    n = _require_int(model_data['n'], "n")
    r = _require_int(model_data['r'], "r")
    rprime = _require_int(model_data['rprime'], "rprime")
    N = r + rprime

    rho = model_data['rho']
    if not isinstance(rho, list):
        raise ModelFileError("'rho' must be a list of rows", location="rho")
    if len(rho) != N:
        raise ModelFileError(f"'rho' has {len(rho)} rows, expected r + rprime = {N}", location="rho")
    for i, row in enumerate(rho):
        if not isinstance(row, list) or len(row) != n:
            raise ModelFileError(f"row must be a list of {n} polynomial strings", location=f"rho[{i}]")
        for j, entry in enumerate(row):
            _require_poly_text(entry, f"rho[{i}][{j}]")

    c = model_data.get('c', [])
    if not isinstance(c, list):
        raise ModelFileError("'c' must be a list of [i, j, k, poly] entries", location="c")
    for idx, entry in enumerate(c):
        if not isinstance(entry, list) or len(entry) != 4:
            raise ModelFileError("entry must be [i, j, k, poly]", location=f"c[{idx}]")
        for pos in range(3):
            value = _require_int(entry[pos], f"c[{idx}][{pos}]")
            if not 1 <= value <= N:
                raise ModelFileError(f"index {value} outside 1..{N}", location=f"c[{idx}][{pos}]")
        _require_poly_text(entry[3], f"c[{idx}][3]")

    if 'name' in model_data and not isinstance(model_data['name'], str):
        raise ModelFileError("'name' must be a string", location="name")
    return True
