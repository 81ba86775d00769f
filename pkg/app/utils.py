import re
from pathlib import Path

from core.errors import ConfigDigestMismatch, InvalidConfig, MissingArtifact, RespireError

EXIT_OK = 0
EXIT_USAGE = 1


def parse_mel_values(text, default):
    """'23' -> [23], '2..4' -> [2, 3, 4], '13,23' -> [13, 23]"""
    if text is None or str(text).strip() == '':
        return [int(default)]
    text = str(text).strip()
    match = re.fullmatch(r'(\d+)\s*\.\.\s*(\d+)', text)
    if match:
        low, high = int(match.group(1)), int(match.group(2))
        if low > high:
            raise InvalidConfig(f"empty Mel range '{text}'")
        return list(range(low, high + 1))
    try:
        values = sorted({int(part) for part in text.split(',') if part.strip()})
    except ValueError as e:
        raise InvalidConfig(f"cannot parse Mel coefficient list '{text}'") from e
    if not values:
        raise InvalidConfig(f"cannot parse Mel coefficient list '{text}'")
    return values


def require_file(path, what):
    path = Path(path)
    if not path.is_file():
        raise MissingArtifact(path, what)
    return path


def check_digest(expected, found, what):
    """Fail loudly when an artifact was produced under a different MFCC configuration"""
    if found != expected:
        raise ConfigDigestMismatch(expected, found, what)


def model_path(output_dir, kind, mel, k=None):
    suffix = f"_k{k}" if k else ''
    return Path(output_dir) / 'models' / f"{kind}_m{mel}{suffix}.json"


def trace_path(output_dir, kind, mel):
    return Path(output_dir) / 'traces' / f"{kind}_m{mel}.json"


def format_file_size(size_bytes):
    """Format file size in human readable format"""
    if size_bytes == 0:
        return "0 B"

    size_names = ["B", "KB", "MB", "GB"]
    i = 0
    while size_bytes >= 1024 and i < len(size_names) - 1:
        size_bytes /= 1024.0
        i += 1

    return f"{size_bytes:.1f} {size_names[i]}"


class UsageError(RespireError):
    """A command was invoked without something it needs"""
    exit_code = EXIT_USAGE
