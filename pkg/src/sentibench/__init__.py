"""Sentiment classification workbench for Indonesian e-commerce reviews.

Text cleaning, TF-IDF features, softmax regression, a Pegasos linear SVM,
histogram gradient boosting and a numpy BiLSTM, all usable as scikit-learn
estimators, plus evaluation, model files, a CLI and a JSON endpoint.
"""
__version__ = "0.1.0"
