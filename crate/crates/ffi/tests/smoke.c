#include <stdio.h>
#include <string.h>
#include "mdmsim.h"

static const char *PARITY =
    "DFA\nSTATES e o\nALPHABET 0 1\nSTART e\nACCEPT e\n"
    "T e 0 e\nT e 1 o\nT o 0 o\nT o 1 e\nEND\n";

int main(void) {
    MdmMachine *dfa = NULL, *mdm = NULL;
    if (mdm_machine_parse(PARITY, &dfa) != MDM_STATUS_OK) return 1;
    if (mdm_compile(dfa, "mdm", 0, 8, 3, &mdm) != MDM_STATUS_OK) return 2;
    char *y = NULL;
    if (mdm_run(mdm, "1101", 0, 0, false, 0, &y, NULL) != MDM_STATUS_OK) return 3;
    int rej = strstr(y, "<rej>") != NULL;
    mdm_string_free(y);
    if (!rej) return 4;
    if (mdm_run(mdm, "12", 0, 0, false, 0, &y, NULL) != MDM_STATUS_PARSE) return 5;
    printf("%s\n", mdm_last_error());
    mdm_machine_free(mdm);
    mdm_machine_free(dfa);
    return 0;
}
