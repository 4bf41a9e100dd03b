import numpy as np
import pytest

from speechcoord.audio_io import AudioBuffer


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)


def tone(freq_hz: float, seconds: float, sample_rate: int = 16000, amplitude: float = 0.5):
    t = np.arange(int(round(seconds * sample_rate))) / sample_rate
    return AudioBuffer(amplitude * np.sin(2.0 * np.pi * freq_hz * t), sample_rate)


MINIMAL_TEXTGRID = """File type = "ooTextFile"
Object class = "TextGrid"

xmin = 0
xmax = 0.5
tiers? <exists>
size = 1
item []:
    item [1]:
        class = "IntervalTier"
        name = "phones"
        xmin = 0
        xmax = 0.5
        intervals: size = 1
        intervals [1]:
            xmin = 0.0
            xmax = 0.5
            text = "AH"
"""


def textgrid_text(labels, tier="phones", dt=0.1):
    """Build a long-form TextGrid whose phone tier holds `labels` in order."""
    lines = [
        'File type = "ooTextFile"',
        'Object class = "TextGrid"',
        "",
        "xmin = 0",
        f"xmax = {len(labels) * dt}",
        "tiers? <exists>",
        "size = 1",
        "item []:",
        "    item [1]:",
        '        class = "IntervalTier"',
        f'        name = "{tier}"',
        "        xmin = 0",
        f"        xmax = {len(labels) * dt}",
        f"        intervals: size = {len(labels)}",
    ]
    for i, label in enumerate(labels):
        escaped = label.replace('"', '""')
        lines += [
            f"        intervals [{i + 1}]:",
            f"            xmin = {i * dt}",
            f"            xmax = {(i + 1) * dt}",
            f'            text = "{escaped}"',
        ]
    return "\n".join(lines) + "\n"
