"""SyLSTM: a BiLSTM + dependency-graph GCN toolkit for fine-grained
offensive language detection on Twitter."""

__version__ = "0.1.0"
