# genescan: model family identification from computational graphs
__version__ = "0.1.0"
