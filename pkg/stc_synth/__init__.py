# stc_synth/__init__.py
"""
Toolkit de síntesis de estrategias self-triggered casi óptimas para lazos LTI.
"""

__version__ = "0.1.0"
