# ctxrep tests
