# QAG test suite
